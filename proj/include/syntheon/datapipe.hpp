#ifndef SYNTHEON_DATAPIPE_HPP
#define SYNTHEON_DATAPIPE_HPP

#include "syntheon/augment.hpp"
#include "syntheon/mathkernels.hpp"
#include "syntheon/mesh_io.hpp"
#include "syntheon/parallel.hpp"
#include "syntheon/png_io.hpp"
#include "syntheon/raster.hpp"
#include "syntheon/viewsphere.hpp"

#include "json.hpp"

#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>

namespace syntheon
{

inline constexpr const char* engine_version = "1.0.0";
inline constexpr int manifest_format_version = 1;
inline constexpr int sampling_distribution_version = 1;
inline constexpr int triplet_rule_version = 1;
inline constexpr const char* manifest_file_name = "manifest.jsonl";

using Json = nlohmann::ordered_json;

// ===========================================================================
// Stack encodings
// ===========================================================================

/// round((n + 1) / 2 * 255), clamped to [0, 255].
inline std::uint8_t encode_normal_component(double n)
{
    return static_cast<std::uint8_t>(std::clamp(std::lround((n + 1.0) * 0.5 * 255.0), 0L, 255L));
}

inline double decode_normal_component(std::uint8_t v) { return v / 255.0 * 2.0 - 1.0; }

struct StackPaths
{
    std::filesystem::path normal, depth, semantic;
};

/// Writes <dir>/<stem>_{normal,depth,semantic}.png: 8-bit RGB normals, 16-bit depth in
/// whole millimetres, 8-bit class ids.
inline StackPaths export_stack(const ModalityStack& stack, const std::filesystem::path& dir, const std::string& stem)
{
    std::filesystem::create_directories(dir);
    const int w = stack.width(), h = stack.height();
    StackPaths paths{dir / (stem + "_normal.png"), dir / (stem + "_depth.png"), dir / (stem + "_semantic.png")};

    std::vector<std::uint8_t> normal(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < normal.size(); ++i)
        normal[i] = encode_normal_component(stack.normal.data()[i]);
    write_png(paths.normal, w, h, 3, 8, normal.data());

    std::vector<std::uint16_t> depth(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double d = std::round(static_cast<double>(stack.depth.data()[i]));
        if (d < 0.0 || d > 65535.0)
            throw Error("range", "export_stack: depth does not fit 16 bits (mm)");
        depth[i] = static_cast<std::uint16_t>(d);
    }
    write_png(paths.depth, w, h, 1, 16, depth.data());

    write_png(paths.semantic, w, h, 1, 8, stack.semantic.data().data());
    return paths;
}

/// Inverse of export_stack. Background normals (semantic 0) decode to exactly zero.
inline ModalityStack import_stack(const StackPaths& paths)
{
    const PngImage normal = read_png(paths.normal);
    const PngImage depth = read_png(paths.depth);
    const PngImage semantic = read_png(paths.semantic);
    const int w = normal.width, h = normal.height;
    if (normal.channels != 3 || normal.bit_depth != 8 || depth.channels != 1 || depth.bit_depth != 16 ||
        semantic.channels != 1 || semantic.bit_depth != 8)
        throw Error("parse", "import_stack: unexpected PNG layout in " + paths.normal.parent_path().string());
    if (depth.width != w || depth.height != h || semantic.width != w || semantic.height != h)
        throw Error("parse", "import_stack: modalities are not co-registered");

    ModalityStack s;
    s.normal = Image(w, h, 3, 0.0f);
    s.depth = Image(w, h, 1, 0.0f);
    s.semantic = ImageBuffer<std::uint8_t>(w, h, 1, 0);
    bool any = false;
    for (std::size_t i = 0; i < s.semantic.pixel_count(); ++i) {
        const auto cls = static_cast<std::uint8_t>(semantic.samples[i]);
        s.semantic.data()[i] = cls;
        s.depth.data()[i] = static_cast<float>(depth.samples[i]);
        if (cls == 0)
            continue;
        any = true;
        for (int c = 0; c < 3; ++c)
            s.normal.data()[i * 3 + c] =
                static_cast<float>(decode_normal_component(static_cast<std::uint8_t>(normal.samples[i * 3 + c])));
    }
    s.empty_foreground = !any;
    return s;
}

// ===========================================================================
// Manifest
// ===========================================================================

inline Json pose_to_json(const Pose& p)
{
    return Json{{"q", {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z}},
                {"radius", p.radius},
                {"inplane_deg", p.inplane_deg},
                {"vertex_index", p.vertex_index}};
}

inline Pose pose_from_json(const Json& j)
{
    const auto& q = j.at("q");
    Pose p;
    p.rotation = Quaternion::unit(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                  q.at(3).get<double>());
    p.radius = j.at("radius").get<double>();
    p.inplane_deg = j.at("inplane_deg").get<double>();
    p.vertex_index = j.at("vertex_index").get<std::size_t>();
    p.position = -p.forward() * p.radius;
    return p;
}

inline Json camera_to_json(const CameraIntrinsics& c)
{
    return Json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics camera_from_json(const Json& j)
{
    return {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
            j.at("cy").get<double>(), j.at("width").get<int>(),   j.at("height").get<int>()};
}

/// Canonical FNV-1a 64 digest, as 16 hex digits.
inline std::string digest_hex(std::string_view bytes)
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : bytes)
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001B3ull;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string file_digest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("io", "cannot read " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return digest_hex(bytes);
}

/// Line-delimited manifest: a header record followed by one record per sample, keys in
/// fixed order so that identical runs produce identical bytes.
struct DatasetManifest
{
    Json header;
    std::vector<Json> samples;

    std::string kind() const { return header.at("kind").get<std::string>(); }

    void write(const std::filesystem::path& dir) const
    {
        std::ofstream out(dir / manifest_file_name, std::ios::binary);
        if (!out)
            throw Error("io", "cannot write manifest in " + dir.string());
        out << header.dump() << '\n';
        for (const Json& s : samples)
            out << s.dump() << '\n';
        if (!out)
            throw Error("io", "manifest write failed in " + dir.string());
    }

    static DatasetManifest read(const std::filesystem::path& dir)
    {
        std::ifstream in(dir / manifest_file_name);
        if (!in)
            throw Error("io", "no manifest in " + dir.string());
        DatasetManifest m;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            Json j;
            try {
                j = Json::parse(line);
            } catch (const std::exception& e) {
                throw Error("parse", "manifest line " + std::to_string(line_no) + ": " + e.what());
            }
            if (line_no == 1) {
                if (j.value("record", "") != "header")
                    throw Error("parse", "manifest does not start with a header record");
                if (j.at("format_version").get<int>() != manifest_format_version)
                    throw Error("version", "manifest format " + j.at("format_version").dump() + " != " +
                                               std::to_string(manifest_format_version));
                m.header = std::move(j);
            } else {
                if (j.at("id").get<std::size_t>() != m.samples.size())
                    throw Error("parse", "manifest sample ids are not dense at line " + std::to_string(line_no));
                m.samples.push_back(std::move(j));
            }
        }
        if (m.header.is_null())
            throw Error("parse", "empty manifest in " + dir.string());
        return m;
    }
};

inline StackPaths stack_paths(const std::filesystem::path& dir, const Json& sample)
{
    const auto& f = sample.at("files");
    return {dir / f.at("normal").get<std::string>(), dir / f.at("depth").get<std::string>(),
            dir / f.at("semantic").get<std::string>()};
}

inline std::string sample_stem(std::size_t id)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", id);
    return buf;
}

/// A clean dataset loaded back from disk.
struct CleanDataset
{
    std::filesystem::path dir;
    DatasetManifest manifest;
    std::vector<ModalityStack> stacks;
};

inline CleanDataset load_clean_dataset(const std::filesystem::path& dir, unsigned workers = 1)
{
    CleanDataset d{dir, DatasetManifest::read(dir), {}};
    if (d.manifest.kind() != "clean")
        throw Error("config", dir.string() + " is not a clean-modality dataset");
    if (d.manifest.samples.empty())
        throw Error("empty", "clean dataset has no samples: " + dir.string());
    d.stacks.resize(d.manifest.samples.size());
    parallel_for(d.stacks.size(), workers, [&](std::size_t i) {
        const Json& rec = d.manifest.samples[i];
        ModalityStack s = import_stack(stack_paths(dir, rec));
        s.pose = pose_from_json(rec.at("pose"));
        s.camera = camera_from_json(rec.at("camera"));
        s.class_id = rec.at("class_id").get<int>();
        d.stacks[i] = std::move(s);
    });
    return d;
}

// ===========================================================================
// Render
// ===========================================================================

struct RenderSettings
{
    std::filesystem::path meshes_dir;
    std::filesystem::path out_dir;
    ViewSphereConfig view;
    /// Mesh file name (or stem) -> symmetry; meshes not listed use view.symmetry.
    std::map<std::string, Symmetry> symmetry_overrides;
    double scale = 1.0;
    int image_size = 64;
    double fill = 0.85;
    bool smooth_normals = false;
    unsigned workers = 1;
};

/// Reads a JSON object {"mesh.ply": "plane_symmetric", ...}.
inline std::map<std::string, Symmetry> read_symmetry_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("io", "cannot open symmetry file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw Error("parse", "symmetry file: " + std::string(e.what()));
    }
    if (!j.is_object())
        throw Error("parse", "symmetry file must hold a JSON object");
    std::map<std::string, Symmetry> out;
    for (const auto& [name, value] : j.items())
        out[name] = parse_symmetry(value.get<std::string>());
    return out;
}

inline std::vector<std::filesystem::path> list_meshes(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw Error("io", "mesh directory not found: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string ext = detail::lowercase(e.path().extension().string());
        if (e.is_regular_file() && (ext == ".obj" || ext == ".ply"))
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty())
        throw Error("empty", "no .obj or .ply meshes in " + dir.string());
    return out;
}

inline Json view_config_to_json(const ViewSphereConfig& v)
{
    Json j{{"subdivisions", v.subdivisions},
           {"radius", v.radius},
           {"hemisphere", std::string(to_string(v.hemisphere))},
           {"equator", std::string(to_string(v.equator))},
           {"orientation", std::string(to_string(v.orientation))},
           {"symmetry", std::string(to_string(v.symmetry))}};
    if (v.inplane)
        j["inplane"] = {v.inplane->min_deg, v.inplane->max_deg, v.inplane->stride_deg};
    else
        j["inplane"] = nullptr;
    return j;
}

/// Renders every mesh of settings.meshes_dir over its pose set and writes the clean
/// dataset (PNG modalities plus manifest). Class ids follow sorted file-name order from 1.
inline DatasetManifest run_render(const RenderSettings& settings)
{
    settings.view.validate();
    const auto mesh_paths = list_meshes(settings.meshes_dir);
    if (mesh_paths.size() > 255)
        throw Error("range", "at most 255 classes fit the semantic map");

    Json config{{"view", view_config_to_json(settings.view)},
                {"scale", settings.scale},
                {"image_size", settings.image_size},
                {"fill", settings.fill},
                {"smooth_normals", settings.smooth_normals},
                {"depth", "optical-axis z, mm"}};
    Json overrides = Json::object();
    for (const auto& [name, sym] : settings.symmetry_overrides)
        overrides[name] = std::string(to_string(sym));
    config["symmetry_overrides"] = overrides;

    std::vector<Mesh> meshes;
    std::vector<RenderJob> jobs;
    meshes.reserve(mesh_paths.size());
    for (std::size_t k = 0; k < mesh_paths.size(); ++k)
        meshes.push_back(normalize_pose_frame(load_mesh(mesh_paths[k], static_cast<int>(k + 1), settings.scale)));
    for (std::size_t k = 0; k < mesh_paths.size(); ++k) {
        ViewSphereConfig view = settings.view;
        const std::string name = mesh_paths[k].filename().string();
        const std::string stem = mesh_paths[k].stem().string();
        if (auto it = settings.symmetry_overrides.find(name); it != settings.symmetry_overrides.end())
            view.symmetry = it->second;
        else if (auto its = settings.symmetry_overrides.find(stem); its != settings.symmetry_overrides.end())
            view.symmetry = its->second;
        jobs.push_back({&meshes[k], build_pose_set(view),
                        CameraIntrinsics::fitting(meshes[k].bounding_radius(), view.radius, settings.image_size,
                                                  settings.fill)});
    }

    RasterOptions options;
    options.smooth_normals = settings.smooth_normals;
    const auto stacks = render_dataset(jobs, settings.workers, options);

    const auto clean_dir = settings.out_dir / "clean";
    std::filesystem::create_directories(clean_dir);
    DatasetManifest manifest;
    manifest.header = Json{{"record", "header"},
                           {"format_version", manifest_format_version},
                           {"kind", "clean"},
                           {"engine_version", engine_version},
                           {"config_hash", digest_hex(config.dump())},
                           {"config", config},
                           {"global_seed", nullptr},
                           {"sampling_version", sampling_distribution_version}};
    manifest.samples.resize(stacks.size());
    std::vector<std::size_t> mesh_of(stacks.size());
    for (std::size_t j = 0, i = 0; j < jobs.size(); ++j)
        for (std::size_t p = 0; p < jobs[j].poses.size(); ++p)
            mesh_of[i++] = j;

    parallel_for(stacks.size(), settings.workers, [&](std::size_t i) {
        const std::string stem = sample_stem(i);
        export_stack(stacks[i], clean_dir, stem);
        manifest.samples[i] = Json{{"id", i},
                                   {"class_id", stacks[i].class_id},
                                   {"mesh", mesh_paths[mesh_of[i]].filename().string()},
                                   {"pose", pose_to_json(stacks[i].pose)},
                                   {"camera", camera_to_json(stacks[i].camera)},
                                   {"empty_foreground", stacks[i].empty_foreground},
                                   {"files",
                                    {{"normal", "clean/" + stem + "_normal.png"},
                                     {"depth", "clean/" + stem + "_depth.png"},
                                     {"semantic", "clean/" + stem + "_semantic.png"}}}};
    });
    manifest.write(settings.out_dir);
    return manifest;
}

// ===========================================================================
// Augmented streaming
// ===========================================================================

/// Unbounded, ordered sequence of augmented samples over a clean set. Sample i uses
/// z drawn from sample_seed(global_seed, i) and clean stack i mod N, so the sequence
/// does not depend on the worker count.
class AugmentedStream
{
public:
    AugmentedStream(std::shared_ptr<const std::vector<ModalityStack>> clean, std::uint64_t global_seed,
                    unsigned workers = 1, std::shared_ptr<const PatchCorpus> corpus = nullptr)
        : m_clean(std::move(clean)), m_seed(global_seed), m_workers(std::max(1u, workers)),
          m_corpus(std::move(corpus))
    {
        if (!m_clean || m_clean->empty())
            throw Error("empty", "AugmentedStream: no clean samples");
        m_support.width = m_clean->front().width();
        m_support.height = m_clean->front().height();
        m_support.patches_available = m_corpus && !m_corpus->empty();
    }

    std::uint64_t global_seed() const noexcept { return m_seed; }
    std::size_t clean_size() const noexcept { return m_clean->size(); }
    const std::vector<ModalityStack>& clean() const noexcept { return *m_clean; }
    const SamplingSupport& support() const noexcept { return m_support; }

    NoiseVector noise_at(std::uint64_t index) const
    {
        return sample_noise_vector(sample_seed(m_seed, index), m_support);
    }

    /// Regenerates sample `index` in isolation.
    AugmentedSample sample_at(std::uint64_t index) const
    {
        const std::uint64_t seed = sample_seed(m_seed, index);
        const std::size_t source = static_cast<std::size_t>(index % m_clean->size());
        AugmentedSample s = augment((*m_clean)[source], sample_noise_vector(seed, m_support), m_corpus.get());
        s.provenance.seed = seed;
        s.provenance.source_index = source;
        return s;
    }

    /// Next sample in index order; batches are computed ahead on the worker pool.
    AugmentedSample next()
    {
        if (m_buffer.empty()) {
            const std::size_t batch = std::max<std::size_t>(16, m_workers * 8);
            std::vector<AugmentedSample> fresh(batch);
            const std::uint64_t base = m_next_index;
            parallel_for(batch, m_workers, [&](std::size_t i) { fresh[i] = sample_at(base + i); });
            for (auto& s : fresh)
                m_buffer.push_back(std::move(s));
            m_next_index += batch;
        }
        AugmentedSample s = std::move(m_buffer.front());
        m_buffer.pop_front();
        return s;
    }

private:
    std::shared_ptr<const std::vector<ModalityStack>> m_clean;
    std::uint64_t m_seed;
    unsigned m_workers;
    std::shared_ptr<const PatchCorpus> m_corpus;
    SamplingSupport m_support;
    std::deque<AugmentedSample> m_buffer;
    std::uint64_t m_next_index = 0;
};

/// [-1, 1] -> round((v + 1) / 2 * 255).
inline std::uint8_t encode_signed_unit(float v)
{
    return static_cast<std::uint8_t>(std::clamp(std::lround((v + 1.0) * 0.5 * 255.0), 0L, 255L));
}

inline std::uint8_t encode_unit(float v)
{
    return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

inline std::vector<std::uint8_t> encode_rgb8(const Image& rgb)
{
    std::vector<std::uint8_t> out(rgb.data().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = encode_signed_unit(rgb.data()[i]);
    return out;
}

struct AugmentSettings
{
    std::filesystem::path in_dir;
    std::filesystem::path out_dir;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    /// Empty path: procedural backgrounds only.
    std::filesystem::path patch_dir;
    unsigned workers = 1;
};

/// Materializes `count` samples of the augmented stream (8-bit RGB and lightness PNGs)
/// with a manifest that records each sample's seed and serialized z.
inline DatasetManifest run_augment(const AugmentSettings& settings)
{
    if (settings.count == 0)
        throw Error("range", "augment: --count must be > 0");
    CleanDataset clean = load_clean_dataset(settings.in_dir, settings.workers);
    std::shared_ptr<const PatchCorpus> corpus;
    if (!settings.patch_dir.empty()) {
        auto c = std::make_shared<PatchCorpus>(PatchCorpus::open(settings.patch_dir));
        if (c->empty())
            throw Error("config", "patch corpus " + settings.patch_dir.string() +
                                      " has no PNG images; use --bg proc for procedural backgrounds");
        corpus = std::move(c);
    }
    const AugmentedStream stream(std::make_shared<const std::vector<ModalityStack>>(std::move(clean.stacks)),
                                 settings.seed, settings.workers, corpus);

    const auto sample_dir = settings.out_dir / "augmented";
    std::filesystem::create_directories(sample_dir);
    DatasetManifest manifest;
    Json corpus_json = nullptr;
    if (corpus) {
        Json names = Json::array();
        for (const auto& p : corpus->paths())
            names.push_back(p.filename().string());
        corpus_json = names;
    }
    manifest.header = Json{{"record", "header"},
                           {"format_version", manifest_format_version},
                           {"kind", "augmented"},
                           {"engine_version", engine_version},
                           {"config_hash", clean.manifest.header.at("config_hash")},
                           {"source_manifest_digest", file_digest(settings.in_dir / manifest_file_name)},
                           {"global_seed", settings.seed},
                           {"sampling_version", sampling_distribution_version},
                           {"noise_layout_version", NoiseVector::layout_version},
                           {"count", settings.count},
                           {"patch_corpus", corpus_json}};
    manifest.samples.resize(settings.count);

    parallel_for(settings.count, settings.workers, [&](std::size_t i) {
        const AugmentedSample s = stream.sample_at(i);
        const std::string stem = sample_stem(i);
        const auto rgb = encode_rgb8(s.rgb);
        write_png(sample_dir / (stem + "_rgb.png"), s.rgb.width(), s.rgb.height(), 3, 8, rgb.data());
        std::vector<std::uint8_t> light(s.lightness.data().size());
        for (std::size_t k = 0; k < light.size(); ++k)
            light[k] = encode_unit(s.lightness.data()[k]);
        write_png(sample_dir / (stem + "_lightness.png"), s.rgb.width(), s.rgb.height(), 1, 8, light.data());
        manifest.samples[i] = Json{{"id", i},
                                   {"source_id", s.provenance.source_index},
                                   {"class_id", s.provenance.class_id},
                                   {"pose", pose_to_json(s.provenance.pose)},
                                   {"seed", s.provenance.seed},
                                   {"z", to_record(s.provenance.z)},
                                   {"files",
                                    {{"rgb", "augmented/" + stem + "_rgb.png"},
                                     {"lightness", "augmented/" + stem + "_lightness.png"}}}};
    });
    manifest.write(settings.out_dir);
    return manifest;
}

// ===========================================================================
// Triplets
// ===========================================================================

enum class TripletTask { ic, icpe };

inline TripletTask parse_triplet_task(std::string_view s)
{
    if (s == "ic") return TripletTask::ic;
    if (s == "icpe") return TripletTask::icpe;
    throw Error("parse", "unknown triplet task '" + std::string(s) + "'");
}

struct PoseRecord
{
    std::size_t id = 0;
    int class_id = 0;
    Quaternion rotation;
};

struct TripletRecord
{
    std::size_t anchor = 0, positive = 0, negative = 0;
    double margin = 0.0;
    bool operator==(const TripletRecord&) const = default;
};

struct TripletBatch
{
    std::vector<TripletRecord> triplets;
    std::vector<std::string> warnings;
};

inline constexpr int triplet_candidates = 8;

/// Anchors are uniform. The positive is the same-class candidate (out of 8 uniform draws)
/// closest in pose. The negative is a different-class sample for `ic`; for `icpe` a coin
/// flip picks either a different class or the farthest-pose same-class candidate. Margins:
/// `ic` uses n, `icpe` uses icpe_margin(anchor, positive). Without a second class the
/// negative falls back to the same class and a warning is recorded.
inline TripletBatch generate_triplets(std::span<const PoseRecord> samples, TripletTask task, double n,
                                      std::size_t count, std::uint64_t seed)
{
    if (samples.size() < 2)
        throw Error("empty", "generate_triplets: need at least two samples");
    if (!(n > std::numbers::pi))
        throw Error("range", "generate_triplets: inter-class margin must be > pi");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_class[samples[i].class_id].push_back(i);

    TripletBatch batch;
    if (by_class.size() < 2)
        batch.warnings.push_back("single class: negatives are drawn from the anchor's class");

    CounterRng rng(seed, "triplets");
    auto pick = [&](const std::vector<std::size_t>& pool) {
        return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    };
    auto pick_other = [&](std::size_t exclude, const std::vector<std::size_t>& pool) {
        if (pool.size() == 1)
            return pool.front();
        for (;;) {
            const std::size_t c = pick(pool);
            if (c != exclude)
                return c;
        }
    };
    auto angle = [&](std::size_t a, std::size_t b) {
        return quat_angular_distance(samples[a].rotation, samples[b].rotation);
    };

    batch.triplets.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        const std::size_t a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(samples.size()) - 1));
        const auto& same = by_class[samples[a].class_id];

        std::size_t pos = pick_other(a, same);
        for (int k = 1; k < triplet_candidates; ++k) {
            const std::size_t c = pick_other(a, same);
            if (angle(a, c) < angle(a, pos))
                pos = c;
        }

        const bool cross_class =
            by_class.size() >= 2 && (task == TripletTask::ic || rng.bernoulli());
        std::size_t neg;
        if (cross_class) {
            std::vector<int> others;
            for (const auto& [cls, ids] : by_class)
                if (cls != samples[a].class_id)
                    others.push_back(cls);
            const int cls = others[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(others.size()) - 1))];
            neg = pick(by_class[cls]);
        } else {
            if (same.size() < 2)
                throw Error("empty", "generate_triplets: class with a single sample cannot supply a negative");
            neg = pick_other(a, same);
            for (int k = 1; k < triplet_candidates; ++k) {
                const std::size_t c = pick_other(a, same);
                if (angle(a, c) > angle(a, neg))
                    neg = c;
            }
        }

        const double margin = task == TripletTask::ic
                                  ? n
                                  : icpe_margin(samples[a].class_id, samples[pos].class_id, samples[a].rotation,
                                                samples[pos].rotation, n);
        batch.triplets.push_back({samples[a].id, samples[pos].id, samples[neg].id, margin});
    }
    return batch;
}

inline std::vector<PoseRecord> pose_records(const DatasetManifest& manifest)
{
    std::vector<PoseRecord> out;
    out.reserve(manifest.samples.size());
    for (const Json& s : manifest.samples) {
        const auto& q = s.at("pose").at("q");
        out.push_back({s.at("id").get<std::size_t>(), s.at("class_id").get<int>(),
                       Quaternion{q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                  q.at(3).get<double>()}});
    }
    return out;
}

inline void write_triplets(const std::filesystem::path& path, const TripletBatch& batch, TripletTask task, double n,
                           std::uint64_t seed)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("io", "cannot write " + path.string());
    out << Json{{"record", "header"},
                {"task", task == TripletTask::ic ? "ic" : "icpe"},
                {"margin_n", n},
                {"seed", seed},
                {"candidates", triplet_candidates},
                {"rule_version", triplet_rule_version},
                {"count", batch.triplets.size()}}
               .dump()
        << '\n';
    for (const TripletRecord& t : batch.triplets)
        out << Json{{"anchor", t.anchor}, {"positive", t.positive}, {"negative", t.negative}, {"margin", t.margin}}
                   .dump()
            << '\n';
    if (!out)
        throw Error("io", "write failed for " + path.string());
}

inline std::vector<TripletRecord> read_triplets(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("io", "cannot open " + path.string());
    std::vector<TripletRecord> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const Json j = Json::parse(line);
        if (header) {
            header = false;
            continue;
        }
        out.push_back({j.at("anchor").get<std::size_t>(), j.at("positive").get<std::size_t>(),
                       j.at("negative").get<std::size_t>(), j.at("margin").get<double>()});
    }
    return out;
}

// ===========================================================================
// Preview
// ===========================================================================

/// Contact sheet of the first rows x cols samples: RGB for augmented sets, encoded
/// normals for clean sets.
inline void write_preview(const std::filesystem::path& dir, int rows, int cols, const std::filesystem::path& out)
{
    if (rows <= 0 || cols <= 0)
        throw Error("range", "preview grid must be positive");
    const DatasetManifest m = DatasetManifest::read(dir);
    const bool augmented = m.kind() == "augmented";
    const std::size_t n = std::min(m.samples.size(), static_cast<std::size_t>(rows) * cols);
    if (n == 0)
        throw Error("empty", "nothing to preview in " + dir.string());
    std::vector<PngImage> tiles;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& files = m.samples[i].at("files");
        tiles.push_back(read_png(dir / files.at(augmented ? "rgb" : "normal").get<std::string>()));
    }
    const int tw = tiles.front().width, th = tiles.front().height;
    const int W = tw * cols, H = th * rows;
    std::vector<std::uint8_t> sheet(static_cast<std::size_t>(W) * H * 3, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const PngImage& t = tiles[i];
        if (t.width != tw || t.height != th || t.channels != 3)
            throw Error("parse", "preview tiles have mismatched sizes");
        const int ox = static_cast<int>(i % cols) * tw, oy = static_cast<int>(i / cols) * th;
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                for (int c = 0; c < 3; ++c)
                    sheet[(static_cast<std::size_t>(oy + y) * W + ox + x) * 3 + c] =
                        static_cast<std::uint8_t>(t.samples[(static_cast<std::size_t>(y) * tw + x) * 3 + c]);
    }
    write_png(out, W, H, 3, 8, sheet.data());
}

} // namespace syntheon

#endif // SYNTHEON_DATAPIPE_HPP
