#ifndef SYNTHEON_SYNTHEON_HPP
#define SYNTHEON_SYNTHEON_HPP

#include "syntheon/geometry.hpp"
#include "syntheon/mesh_io.hpp"
#include "syntheon/viewsphere.hpp"
#include "syntheon/raster.hpp"
#include "syntheon/rng.hpp"
#include "syntheon/noise.hpp"
#include "syntheon/png_io.hpp"
#include "syntheon/augment.hpp"
#include "syntheon/mathkernels.hpp"
#include "syntheon/datapipe.hpp"

#endif // SYNTHEON_SYNTHEON_HPP
