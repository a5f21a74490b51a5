// liftreg command-line tool.
//
//   liftreg phantom gen   --spec S.json --seed N --n COUNT --out DIR
//   liftreg drr render    --volume V.json --geometry G.json --out P.json
//   liftreg lift3d export --projections P.json --geometry G.json --grid V.json --out L.json
//   liftreg subspace build --dvf-dir DIR --variance 0.99 --out S.json
//   liftreg register {subspace3d|subspace2d|dense} ...
//   liftreg evaluate --dvf U.json --lm-src A.csv --lm-tgt B.csv --mask-src M.json --mask-tgt N.json --out R.json
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liftreg/errors.hpp"
#include "liftreg/evaluation.hpp"
#include "liftreg/geometry.hpp"
#include "liftreg/io.hpp"
#include "liftreg/phantom.hpp"
#include "liftreg/registration.hpp"
#include "liftreg/subspace.hpp"

namespace fs = std::filesystem;
using namespace liftreg;
using io::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
}

// ---- phantom gen ----------------------------------------------------------

struct PhantomArgs {
    std::string spec;
    std::uint64_t seed = 0;
    int n = 1;
    std::string out;
};

void run_phantom_gen(const PhantomArgs& a)
{
    PhantomSpec spec = a.spec.empty() ? PhantomSpec{} : io::phantom_spec_from_json(io::read_json(a.spec));
    spec.seed = a.seed;
    validate(spec);
    if (a.n < 0) {
        throw InputError("--n must be >= 0");
    }
    const fs::path out(a.out);
    fs::create_directories(out);

    json members = json::array();
    const auto modes = a.n > 0 ? deformation_modes(spec) : std::vector<DisplacementField>{};
    const SdctGeometry geom = phantom_geometry(spec);
    for (int i = 0; i < a.n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%03d", i);
        const fs::path dir = out / name;
        fs::create_directories(dir);
        const std::uint64_t sample_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
        const PhantomSample s = make_pair(spec, sample_seed, modes);

        io::write_volume(dir / "source.json", s.source);
        io::write_volume(dir / "target.json", s.target);
        io::write_mask(dir / "source_mask.json", s.source_mask);
        io::write_mask(dir / "target_mask.json", s.target_mask);
        io::write_dvf(dir / "dvf_true.json", s.true_displacement, io::DType::f64le);
        io::write_projections(dir / "projections.json", s.projections);
        io::write_geometry(dir / "geometry.json", geom);
        io::write_landmarks(dir / "landmarks_src.csv", s.source_landmarks);
        io::write_landmarks(dir / "landmarks_tgt.csv", s.target_landmarks);
        io::write_alpha(dir / "alpha_true.json", s.true_coefficients);

        json m;
        m["name"] = name;
        m["seed"] = sample_seed;
        m["files"] = {{"source", "source.json"},
                      {"target", "target.json"},
                      {"source_mask", "source_mask.json"},
                      {"target_mask", "target_mask.json"},
                      {"dvf_true", "dvf_true.json"},
                      {"projections", "projections.json"},
                      {"geometry", "geometry.json"},
                      {"landmarks_src", "landmarks_src.csv"},
                      {"landmarks_tgt", "landmarks_tgt.csv"},
                      {"alpha_true", "alpha_true.json"}};
        members.push_back(m);
    }

    json manifest;
    manifest["spec"] = io::phantom_spec_to_json(spec);
    manifest["seed"] = spec.seed;
    manifest["seed_split"] = "sample seed = derive_seed(seed, index), splitmix64";
    manifest["members"] = members;
    io::write_json(out / "manifest.json", manifest);
}

// ---- drr / lift3d ---------------------------------------------------------

struct DrrArgs {
    std::string volume, geometry, out;
    double step = 0.0;
    std::string dtype = "f32le";
};

void run_drr_render(const DrrArgs& a)
{
    const Image3D vol = io::read_volume(a.volume);
    const SdctGeometry geom = io::read_geometry(a.geometry);
    const double step = a.step > 0.0 ? a.step : default_drr_step(vol.grid);
    const ProjectionSet projs = render_projections(vol, geom, step);
    ensure_parent(a.out);
    io::write_projections(a.out, projs, io::parse_dtype(a.dtype));
}

struct LiftArgs {
    std::string projections, geometry, grid, out;
    std::string dtype = "f32le";
};

void run_lift3d_export(const LiftArgs& a)
{
    const SdctGeometry geom = io::read_geometry(a.geometry);
    const ProjectionSet projs = io::read_projections(a.projections, geom);
    const io::ContainerHeader h = io::read_header(a.grid);
    if (h.kind == io::ContainerKind::image2d || h.kind == io::ContainerKind::subspace) {
        throw InputError("--grid must name a volume, mask or dvf container");
    }
    GridSpec g;
    g.dims = h.dims;
    g.spacing = h.spacing;
    g.origin = h.origin;
    const LiftedVolume lifted = lift3d(projs, g);
    if (lifted.degenerate_voxels > 0) {
        std::cerr << "warning: " << lifted.degenerate_voxels
                  << " voxel/emitter pairs level with the emitter were set to 0\n";
    }
    ensure_parent(a.out);
    io::write_multichannel(a.out, lifted.channels, io::parse_dtype(a.dtype));
}

// ---- subspace build -------------------------------------------------------

struct SubspaceArgs {
    std::string dvf_dir, out;
    double variance = 0.99;
    std::string dtype = "f64le";
};

bool is_dvf_header(const fs::path& p)
{
    if (p.extension() != ".json") {
        return false;
    }
    const json j = io::read_json(p);
    return j.is_object() && j.contains("kind") && j["kind"] == "dvf";
}

void run_subspace_build(const SubspaceArgs& a)
{
    if (!(a.variance > 0.0 && a.variance <= 1.0)) {
        throw InputError("--variance must lie in (0, 1]");
    }
    if (!fs::is_directory(a.dvf_dir)) {
        throw InputError("--dvf-dir " + a.dvf_dir + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(a.dvf_dir)) {
        if (entry.is_regular_file() && is_dvf_header(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw InputError("no dvf containers found under " + a.dvf_dir);
    }
    std::vector<DisplacementField> fields;
    fields.reserve(files.size());
    for (const auto& f : files) {
        fields.push_back(io::read_dvf(f));
    }
    const DeformationSubspace sub = build_subspace(fields, a.variance);
    ensure_parent(a.out);
    io::write_subspace(a.out, sub, io::parse_dtype(a.dtype));
    std::cout << "N_e = " << sub.n_modes() << " from " << fields.size() << " fields\n";
}

// ---- register -------------------------------------------------------------

struct RegisterArgs {
    std::string mode;
    std::string source, target, mask_src, mask_tgt, projections, geometry, subspace;
    std::string out_dvf, out_alpha, report;
    double lambda = LossConfig{}.lambda;
    int iters = OptimConfig{}.max_iters;
    double step = OptimConfig{}.step_size;
    double tol_grad = OptimConfig{}.tol_grad;
    double tol_loss = OptimConfig{}.tol_loss;
    double drr_step = 0.0;
    std::string optimizer = "gd";
    std::uint64_t seed = 0;
    bool ncc_within_mask = false;
    std::string dtype = "f64le";
};

void require(const std::string& value, const char* flag, const std::string& mode)
{
    if (value.empty()) {
        throw InputError(std::string("register ") + mode + " requires " + flag);
    }
}

void run_register(const RegisterArgs& a)
{
    LossConfig lc;
    lc.lambda = a.lambda;
    lc.drr_step_mm = a.drr_step;
    lc.ncc_within_target_mask = a.ncc_within_mask;
    OptimConfig oc;
    oc.max_iters = a.iters;
    oc.step_size = a.step;
    oc.tol_grad = a.tol_grad;
    oc.tol_loss = a.tol_loss;
    oc.seed = a.seed;
    if (a.optimizer == "gd") {
        oc.optimizer = OptimizerKind::gradient_descent;
    } else if (a.optimizer == "momentum") {
        oc.optimizer = OptimizerKind::momentum;
    } else {
        throw InputError("--optimizer must be gd or momentum");
    }
    const io::DType dtype = io::parse_dtype(a.dtype);

    require(a.source, "--source", a.mode);
    require(a.mask_src, "--mask-src", a.mode);
    require(a.out_dvf, "--out-dvf", a.mode);

    DisplacementField u;
    RegistrationReport report;
    if (a.mode == "subspace3d" || a.mode == "dense") {
        require(a.target, "--target", a.mode);
        require(a.mask_tgt, "--mask-tgt", a.mode);
        if (!a.projections.empty()) {
            throw InputError("register " + a.mode + " takes --target, not --projections");
        }
        const Image3D src = io::read_volume(a.source);
        const Image3D tgt = io::read_volume(a.target);
        const Mask3D ms = io::read_mask(a.mask_src);
        const Mask3D mt = io::read_mask(a.mask_tgt);
        lc.mode = LossMode::sim3d;
        if (a.mode == "dense") {
            if (!a.subspace.empty() || !a.out_alpha.empty()) {
                throw InputError("register dense takes no --subspace or --out-alpha");
            }
            auto r = register_dense_3d(src, tgt, ms, mt, lc, oc);
            u = std::move(r.displacement);
            report = std::move(r.report);
        } else {
            require(a.subspace, "--subspace", a.mode);
            const DeformationSubspace sub = io::read_subspace(a.subspace);
            auto r = register_subspace_3d(src, tgt, ms, mt, sub, lc, oc);
            u = std::move(r.displacement);
            report = std::move(r.report);
        }
    } else if (a.mode == "subspace2d") {
        require(a.projections, "--projections", a.mode);
        require(a.geometry, "--geometry", a.mode);
        require(a.subspace, "--subspace", a.mode);
        if (!a.target.empty() || !a.mask_tgt.empty()) {
            throw InputError("register subspace2d uses projections only; drop --target/--mask-tgt");
        }
        const Image3D src = io::read_volume(a.source);
        const Mask3D ms = io::read_mask(a.mask_src);
        const SdctGeometry geom = io::read_geometry(a.geometry);
        const ProjectionSet projs = io::read_projections(a.projections, geom);
        const DeformationSubspace sub = io::read_subspace(a.subspace);
        lc.mode = LossMode::sim2d;
        auto r = register_subspace_2d(src, projs, ms, sub, lc, oc);
        u = std::move(r.displacement);
        report = std::move(r.report);
    } else {
        throw InputError("unknown register mode '" + a.mode + "' (subspace3d, subspace2d, dense)");
    }

    ensure_parent(a.out_dvf);
    io::write_dvf(a.out_dvf, u, dtype);
    if (!a.out_alpha.empty()) {
        ensure_parent(a.out_alpha);
        io::write_alpha(a.out_alpha, report.alpha);
    }
    if (!a.report.empty()) {
        ensure_parent(a.report);
        io::write_json(a.report, io::report_to_json(report));
    }
    std::cout << "final loss " << io::format_double(report.final_loss) << " after " << report.iterations
              << " iterations (" << report.stop_reason << ")\n";
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string dvf, lm_src, lm_tgt, mask_src, mask_tgt, out;
};

void run_evaluate(const EvaluateArgs& a)
{
    const DisplacementField u = io::read_dvf(a.dvf);
    const Landmarks ls = io::read_landmarks(a.lm_src);
    const Landmarks lt = io::read_landmarks(a.lm_tgt);
    const Mask3D ms = io::read_mask(a.mask_src);
    const Mask3D mt = io::read_mask(a.mask_tgt);
    const MetricsReport r = evaluate_registration(u, ls, lt, ms, mt);
    std::vector<std::string> warnings;
    if (r.excluded_landmarks > 0) {
        warnings.push_back(std::to_string(r.excluded_landmarks) + " landmarks outside the field grid were excluded");
    }
    ensure_parent(a.out);
    io::write_json(a.out, io::metrics_to_json(r, warnings));
    std::cout << "mtre " << io::format_double(r.mtre_mm) << " mm, dice " << io::format_double(r.dice_pct)
              << " %, neg jacobian " << io::format_double(r.pct_neg_jacobian) << " %\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LiftReg: limited-angle 2D/3D deformable registration toolkit"};
    app.require_subcommand(1);

    PhantomArgs phantom;
    auto* phantom_cmd = app.add_subcommand("phantom", "Synthetic phantom datasets");
    phantom_cmd->require_subcommand(1);
    auto* gen = phantom_cmd->add_subcommand("gen", "Generate phantom samples and a manifest");
    gen->add_option("--spec", phantom.spec, "PhantomSpec JSON (missing keys keep defaults)")->check(CLI::ExistingFile);
    gen->add_option("--seed", phantom.seed, "Master seed")->required();
    gen->add_option("--n", phantom.n, "Number of samples")->required();
    gen->add_option("--out", phantom.out, "Output directory")->required();

    DrrArgs drr;
    auto* drr_cmd = app.add_subcommand("drr", "Digitally reconstructed radiographs");
    drr_cmd->require_subcommand(1);
    auto* render = drr_cmd->add_subcommand("render", "Render one projection per emitter");
    render->add_option("--volume", drr.volume)->required();
    render->add_option("--geometry", drr.geometry)->required();
    render->add_option("--out", drr.out)->required();
    render->add_option("--step", drr.step, "Ray step in mm (default: half the smallest spacing)");
    render->add_option("--dtype", drr.dtype);

    LiftArgs lift;
    auto* lift_cmd = app.add_subcommand("lift3d", "Backprojection");
    lift_cmd->require_subcommand(1);
    auto* exp = lift_cmd->add_subcommand("export", "Lift projections onto a 3D grid, one channel per emitter");
    exp->add_option("--projections", lift.projections)->required();
    exp->add_option("--geometry", lift.geometry)->required();
    exp->add_option("--grid", lift.grid, "Any volume/mask/dvf container providing the target grid")->required();
    exp->add_option("--out", lift.out)->required();
    exp->add_option("--dtype", lift.dtype);

    SubspaceArgs subspace;
    auto* sub_cmd = app.add_subcommand("subspace", "Deformation subspace");
    sub_cmd->require_subcommand(1);
    auto* build = sub_cmd->add_subcommand("build", "PCA over every dvf container under a directory");
    build->add_option("--dvf-dir", subspace.dvf_dir)->required();
    build->add_option("--variance", subspace.variance, "Variance fraction in (0, 1]");
    build->add_option("--out", subspace.out)->required();
    build->add_option("--dtype", subspace.dtype);

    RegisterArgs reg;
    auto* reg_cmd = app.add_subcommand("register", "Registration drivers");
    reg_cmd->add_option("mode", reg.mode, "subspace3d | subspace2d | dense")->required();
    reg_cmd->add_option("--source", reg.source);
    reg_cmd->add_option("--target", reg.target);
    reg_cmd->add_option("--mask-src", reg.mask_src);
    reg_cmd->add_option("--mask-tgt", reg.mask_tgt);
    reg_cmd->add_option("--projections", reg.projections);
    reg_cmd->add_option("--geometry", reg.geometry);
    reg_cmd->add_option("--subspace", reg.subspace);
    reg_cmd->add_option("--lambda", reg.lambda);
    reg_cmd->add_option("--iters", reg.iters);
    reg_cmd->add_option("--step", reg.step, "Initial step (max-norm, ~mm)");
    reg_cmd->add_option("--tol-grad", reg.tol_grad);
    reg_cmd->add_option("--tol-loss", reg.tol_loss);
    reg_cmd->add_option("--drr-step", reg.drr_step);
    reg_cmd->add_option("--optimizer", reg.optimizer, "gd | momentum");
    reg_cmd->add_option("--seed", reg.seed);
    reg_cmd->add_flag("--ncc-within-mask", reg.ncc_within_mask);
    reg_cmd->add_option("--out-dvf", reg.out_dvf);
    reg_cmd->add_option("--out-alpha", reg.out_alpha);
    reg_cmd->add_option("--report", reg.report);
    reg_cmd->add_option("--dtype", reg.dtype);

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "mTRE, DICE and folding metrics");
    eval_cmd->add_option("--dvf", ev.dvf)->required();
    eval_cmd->add_option("--lm-src", ev.lm_src)->required();
    eval_cmd->add_option("--lm-tgt", ev.lm_tgt)->required();
    eval_cmd->add_option("--mask-src", ev.mask_src)->required();
    eval_cmd->add_option("--mask-tgt", ev.mask_tgt)->required();
    eval_cmd->add_option("--out", ev.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (gen->parsed()) {
            run_phantom_gen(phantom);
        } else if (render->parsed()) {
            run_drr_render(drr);
        } else if (exp->parsed()) {
            run_lift3d_export(lift);
        } else if (build->parsed()) {
            run_subspace_build(subspace);
        } else if (reg_cmd->parsed()) {
            run_register(reg);
        } else if (eval_cmd->parsed()) {
            run_evaluate(ev);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
