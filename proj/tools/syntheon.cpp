#include "syntheon/syntheon.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace
{

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

int fail(std::string_view kind, std::string_view message, int code = 1)
{
    std::cerr << "error kind=" << kind << " message=\"" << escape(message) << "\"\n";
    return code;
}

std::pair<int, int> parse_grid(const std::string& s)
{
    const auto x = s.find('x');
    if (x == std::string::npos)
        throw syntheon::Error("parse", "grid must be ROWSxCOLS, got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw syntheon::Error("parse", "grid must be ROWSxCOLS, got '" + s + "'");
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"syntheon: synthetic training data from CAD models"};
    app.set_config("--config", "", "read options from an INI/TOML file");
    app.set_version_flag("--version", std::string(syntheon::engine_version));
    app.require_subcommand(1);

    syntheon::RenderSettings render;
    std::string hemisphere = "full", equator = "include", inplane, symmetry_file, orientation = "edge";
    auto* r = app.add_subcommand("render", "render clean normal/depth/semantic maps over a view sphere");
    r->add_option("--meshes", render.meshes_dir, "directory of .obj/.ply meshes")->required();
    r->add_option("--out", render.out_dir, "output dataset directory")->required();
    r->add_option("--subdiv", render.view.subdivisions, "icosphere subdivisions")->capture_default_str();
    r->add_option("--radius", render.view.radius, "view-sphere radius (mm)")->capture_default_str();
    r->add_option("--hemisphere", hemisphere)->check(CLI::IsMember({"full", "upper"}))->capture_default_str();
    r->add_option("--equator", equator)->check(CLI::IsMember({"include", "exclude"}))->capture_default_str();
    r->add_option("--orientation", orientation, "icosahedron orientation")
        ->check(CLI::IsMember({"edge", "pole"}))
        ->capture_default_str();
    r->add_option("--inplane", inplane, "in-plane rotations MIN:MAX:STRIDE in degrees");
    r->add_option("--symmetry", symmetry_file, "JSON object mapping mesh file name to symmetry");
    r->add_option("--scale", render.scale, "mesh unit to mm factor")->capture_default_str();
    r->add_option("--size", render.image_size, "output width and height (px)")->capture_default_str();
    r->add_option("--fill", render.fill, "fraction of the frame spanned by the object")->capture_default_str();
    r->add_flag("--smooth-normals", render.smooth_normals, "interpolate vertex normals");
    r->add_option("--workers", render.workers)->capture_default_str();

    syntheon::AugmentSettings aug;
    std::string bg = "proc";
    auto* a = app.add_subcommand("augment", "materialize augmented samples from a clean dataset");
    a->add_option("--in", aug.in_dir, "clean dataset directory")->required();
    a->add_option("--out", aug.out_dir, "output directory")->required();
    a->add_option("--count", aug.count)->required();
    a->add_option("--seed", aug.seed)->capture_default_str();
    a->add_option("--bg", bg, "'proc' or a directory of PNG background patches")->capture_default_str();
    a->add_option("--workers", aug.workers)->capture_default_str();

    std::filesystem::path triplet_in, triplet_out;
    std::string task = "icpe";
    double margin_n = 3.2;
    std::size_t triplet_count = 0;
    std::uint64_t triplet_seed = 0;
    auto* t = app.add_subcommand("triplets", "sample triplet indices over a dataset");
    t->add_option("--in", triplet_in, "dataset directory")->required();
    t->add_option("--task", task)->check(CLI::IsMember({"ic", "icpe"}))->capture_default_str();
    t->add_option("--margin-n", margin_n, "inter-class margin (> pi)")->capture_default_str();
    t->add_option("--count", triplet_count)->required();
    t->add_option("--seed", triplet_seed)->capture_default_str();
    t->add_option("--out", triplet_out, "output file (default: <in>/triplets.jsonl)");

    std::filesystem::path preview_in, preview_out;
    std::string grid = "8x8";
    auto* p = app.add_subcommand("preview", "write a contact sheet of the first samples");
    p->add_option("--in", preview_in, "dataset directory")->required();
    p->add_option("--grid", grid, "ROWSxCOLS")->capture_default_str();
    p->add_option("--out", preview_out, "output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (r->parsed()) {
            render.view.hemisphere = hemisphere == "upper" ? syntheon::Hemisphere::upper : syntheon::Hemisphere::full;
            render.view.equator = equator == "exclude" ? syntheon::EquatorRule::exclude : syntheon::EquatorRule::include;
            render.view.orientation =
                orientation == "pole" ? syntheon::IcoOrientation::pole_z : syntheon::IcoOrientation::edge_z;
            if (!inplane.empty())
                render.view.inplane = syntheon::parse_inplane(inplane);
            if (!symmetry_file.empty())
                render.symmetry_overrides = syntheon::read_symmetry_file(symmetry_file);
            const auto m = syntheon::run_render(render);
            std::cout << "rendered " << m.samples.size() << " views to " << render.out_dir.string() << '\n';
        } else if (a->parsed()) {
            if (bg != "proc")
                aug.patch_dir = bg;
            const auto m = syntheon::run_augment(aug);
            std::cout << "wrote " << m.samples.size() << " samples to " << aug.out_dir.string() << '\n';
        } else if (t->parsed()) {
            const auto manifest = syntheon::DatasetManifest::read(triplet_in);
            const auto records = syntheon::pose_records(manifest);
            const auto kind = syntheon::parse_triplet_task(task);
            const auto batch = syntheon::generate_triplets(records, kind, margin_n, triplet_count, triplet_seed);
            for (const auto& w : batch.warnings)
                std::cerr << "warning: " << w << '\n';
            if (triplet_out.empty())
                triplet_out = triplet_in / "triplets.jsonl";
            syntheon::write_triplets(triplet_out, batch, kind, margin_n, triplet_seed);
            std::cout << "wrote " << batch.triplets.size() << " triplets to " << triplet_out.string() << '\n';
        } else if (p->parsed()) {
            const auto [rows, cols] = parse_grid(grid);
            syntheon::write_preview(preview_in, rows, cols, preview_out);
        }
    } catch (const syntheon::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
