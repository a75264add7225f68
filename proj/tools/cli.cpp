#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wcs/codec.hpp"
#include "wcs/errors.hpp"
#include "wcs/metrics.hpp"
#include "wcs/parallel.hpp"
#include "wcs/sampling.hpp"
#include "wcs/solver.hpp"

namespace wcs::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

/// I/O problem that maps to the usage/IO exit code.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest round-trip representation unless a printf format is given.
std::string num(double v, const char* format = nullptr) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    if (format == nullptr) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError("cannot open input file '" + path + "'");
}

template <class Fn>
auto guarded_io(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const FormatError&) {
        throw;
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e) != nullptr) throw;
        throw IoError(e.what() + std::string(" [") + path + "]");
    }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string rate_text(Rate r) { return std::to_string(r.num) + "/" + std::to_string(r.den); }

// ---------------------------------------------------------------------------

struct SampleOptions {
    std::string in;
    std::string out;
    std::string rate = "0.25";
    std::size_t block = 128;
    int levels = 2;
    double eta = 0.5;
    double cap_fraction = 1.0;
    std::vector<std::int64_t> bias;
    std::uint64_t seed = 20240601;
    unsigned threads = default_thread_count();
    std::string manifest;
};

struct SolverOptions {
    double beta = SolverConfig{}.beta;
    double lambda = SolverConfig{}.lambda;
    int iters = SolverConfig{}.max_iters;
    double tol = SolverConfig{}.rel_tol;
    std::string step = "lipschitz";
    double ll_weight = SolverConfig{}.ll_l1_weight;
    double group_weight = 1.0;
    bool correction = false;
    std::string denoiser = "off";
    std::string deblocker = "off";

    void add_to(CLI::App& app) {
        app.add_option("--beta", beta, "sparsity weight")->capture_default_str();
        app.add_option("--lambda", lambda, "group coupling weight")->capture_default_str();
        app.add_option("--iters", iters, "maximum iterations K (0: initial reconstruction only)")->capture_default_str();
        app.add_option("--tol", tol, "relative objective change for early stop")->capture_default_str();
        app.add_option("--step", step, "'lipschitz' or a fixed step size")->capture_default_str();
        app.add_option("--ll-weight", ll_weight, "l1 weight on the LL subband")->capture_default_str();
        app.add_option("--group-weight", group_weight, "weight applied to every parent-child group")
            ->capture_default_str();
        app.add_flag("--correction", correction, "apply the denoiser-driven correction step");
        app.add_option("--denoiser", denoiser, "off|median3")->capture_default_str();
        app.add_option("--deblocker", deblocker, "off|boundary_smooth")->capture_default_str();
    }

    SolverConfig config(int levels) const {
        SolverConfig cfg;
        cfg.beta = beta;
        cfg.lambda = lambda;
        cfg.max_iters = iters;
        cfg.rel_tol = tol;
        cfg.ll_l1_weight = ll_weight;
        if (group_weight != 1.0 && levels >= 2) cfg.group_weights.assign(static_cast<std::size_t>(levels - 1), group_weight);
        if (step == "lipschitz") {
            cfg.step_mode = StepMode::Lipschitz;
        } else {
            cfg.step_mode = StepMode::Fixed;
            try {
                cfg.fixed_step = std::stod(step);
            } catch (const std::exception&) {
                throw ArgumentError("--step must be 'lipschitz' or a number, got '" + step + "'");
            }
        }
        cfg.apply_correction = correction;
        cfg.denoiser = parse_denoiser(denoiser);
        cfg.deblocker = parse_deblocker(deblocker);
        return cfg;
    }

    std::vector<std::string> argv() const {
        std::vector<std::string> a{"--beta",     num(beta),      "--lambda",    num(lambda),      "--iters",
                                   std::to_string(iters), "--tol", num(tol),    "--step",         step,
                                   "--ll-weight", num(ll_weight), "--group-weight", num(group_weight), "--denoiser",
                                   denoiser,     "--deblocker",  deblocker};
        if (correction) a.push_back("--correction");
        return a;
    }

    json to_json() const {
        return json{{"beta", beta},           {"lambda", lambda},       {"iters", iters},
                    {"tol", tol},             {"step", step},           {"ll_weight", ll_weight},
                    {"group_weight", group_weight}, {"correction", correction}, {"denoiser", denoiser},
                    {"deblocker", deblocker}};
    }
};

void write_manifest(const std::string& path, const json& manifest) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest '" + path + "'");
    f << manifest.dump(2) << "\n";
}

json manifest_base(const std::string& command, std::vector<std::string> argv, double seconds) {
    argv.insert(argv.begin(), command);
    return json{{"command", command}, {"argv", argv}, {"seconds", seconds}};
}

// ---------------------------------------------------------------------------

int cmd_sample(const SampleOptions& o, std::ostream& out) {
    const auto t0 = Clock::now();
    require_file(o.in);
    const Image image = guarded_io(o.in, [&] { return read_image(o.in); });
    const Rate rate = Rate::parse(o.rate);

    AllocationConfig alloc;
    alloc.eta = o.eta;
    alloc.cap_fraction = o.cap_fraction;
    alloc.bias = o.bias;
    const MeasurementPlan plan = plan_for_image(image, o.block, o.levels, rate, alloc, o.seed);
    const SamplingOperator op = make_operator(plan);
    const MeasurementSet ms = sample_image(image, plan, op, o.threads);
    guarded_io(o.out, [&] { write_file(o.out, encode(ms, op.rows_orthonormalized)); });

    const SubbandLayout layout = make_layout(plan.block_size, plan.levels);
    out << "subband  size      M_s    rate\n";
    for (std::size_t s = 0; s < layout.count(); ++s) {
        char line[96];
        const std::string dims = std::to_string(layout.sides[s]) + "x" + std::to_string(layout.sides[s]);
        std::snprintf(line, sizeof line, "%-8s %-9s %5u  %.4f\n", to_string(layout.ids[s]).c_str(), dims.c_str(),
                      plan.counts[s], static_cast<double>(plan.counts[s]) / static_cast<double>(layout.length(s)));
        out << line;
    }
    out << "total M=" << plan.total << " (" << layout.total << " coefficients per block, " << ms.blocks.size()
        << " blocks)\n";
    if (plan.degenerate_fallback) out << "note: allocation weights were degenerate; size-proportional fallback used\n";
    if (plan.ll_cap_relaxed) out << "note: LL cap relaxed to keep the budget feasible\n";

    std::vector<std::string> argv{"--in",     o.in,          "--out",          o.out,
                                  "--rate",   o.rate,        "--block",        std::to_string(o.block),
                                  "--levels", std::to_string(o.levels), "--eta", num(o.eta),
                                  "--cap-fraction", num(o.cap_fraction), "--seed", std::to_string(o.seed),
                                  "--threads", std::to_string(o.threads)};
    if (!o.bias.empty()) {
        argv.push_back("--bias");
        for (auto b : o.bias) argv.push_back(std::to_string(b));
    }
    json m = manifest_base("sample", argv, seconds_since(t0));
    m["inputs"] = {o.in};
    m["outputs"] = {o.out};
    m["params"] = {{"rate", rate_text(rate)}, {"block", o.block}, {"levels", o.levels}, {"eta", o.eta},
                   {"cap_fraction", o.cap_fraction}, {"bias", o.bias}, {"seed", o.seed}, {"threads", o.threads},
                   {"counts", plan.counts}};
    write_manifest(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest, m);
    return kOk;
}

struct ReconstructOptions {
    std::string in;
    std::string out;
    std::string diag;
    std::string ref;
    std::string manifest;
    unsigned threads = default_thread_count();
    SolverOptions solver;
};

int cmd_reconstruct(const ReconstructOptions& o, std::ostream& out) {
    const auto t0 = Clock::now();
    require_file(o.in);
    const MeasurementSet ms = guarded_io(o.in, [&] { return decode(read_file(o.in)); });
    std::optional<Image> truth;
    if (!o.ref.empty()) {
        require_file(o.ref);
        truth = guarded_io(o.ref, [&] { return read_image(o.ref); });
    }
    const SamplingOperator op = make_operator(ms.plan);
    const SolverConfig cfg = o.solver.config(ms.plan.levels);
    const ReconResult res = reconstruct(ms, op, cfg, truth ? &*truth : nullptr, o.threads);
    guarded_io(o.out, [&] { write_image(res.image, o.out); });

    if (!o.diag.empty()) {
        std::ostringstream csv;
        csv << "iter,objective,psnr\n";
        for (std::size_t k = 0; k < res.state.objective_trace.size(); ++k) {
            csv << (k + 1) << "," << num(res.state.objective_trace[k]) << ","
                << (k < res.psnr_trace.size() ? num(res.psnr_trace[k]) : "") << "\n";
        }
        const std::string text = csv.str();
        guarded_io(o.diag, [&] { write_file(o.diag, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())); });
    }

    out << "iterations=" << res.state.iter << (res.converged ? " (converged)" : "") << " step=" << num(res.step, "%.6f");
    if (!res.state.objective_trace.empty()) out << " objective=" << num(res.state.objective_trace.back(), "%.6g");
    if (truth) out << " psnr_init=" << num(res.initial_psnr, "%.4f") << " psnr=" << num(psnr(*truth, res.image), "%.4f");
    out << "\n";

    std::vector<std::string> argv{"--in", o.in, "--out", o.out, "--threads", std::to_string(o.threads)};
    const auto solver_argv = o.solver.argv();
    argv.insert(argv.end(), solver_argv.begin(), solver_argv.end());
    if (!o.diag.empty()) argv.insert(argv.end(), {"--diag", o.diag});
    if (!o.ref.empty()) argv.insert(argv.end(), {"--ref", o.ref});
    json m = manifest_base("reconstruct", argv, seconds_since(t0));
    m["inputs"] = o.ref.empty() ? json{o.in} : json{o.in, o.ref};
    m["outputs"] = o.diag.empty() ? json{o.out} : json{o.out, o.diag};
    m["params"] = o.solver.to_json();
    m["params"]["threads"] = o.threads;
    m["params"]["rate"] = rate_text(ms.plan.rate);
    m["params"]["block"] = ms.plan.block_size;
    m["params"]["levels"] = ms.plan.levels;
    m["params"]["seed"] = ms.plan.operator_seed;
    m["iterations"] = res.state.iter;
    write_manifest(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest, m);
    return kOk;
}

int cmd_evaluate(const std::string& ref_path, const std::string& test_path, std::ostream& out) {
    require_file(ref_path);
    require_file(test_path);
    const Image ref = guarded_io(ref_path, [&] { return read_image(ref_path); });
    const Image test = guarded_io(test_path, [&] { return read_image(test_path); });
    const QualityReport q = evaluate(ref, test);
    out << "PSNR=" << num(q.psnr_db, "%.4f") << " SSIM=" << num(q.ssim, "%.6f") << "\n";
    return kOk;
}

struct BenchOptions {
    std::string dir;
    std::vector<std::string> rates{"0.1", "0.25", "0.5"};
    std::string out;
    std::size_t block = 128;
    int levels = 2;
    double eta = 0.5;
    std::uint64_t seed = 20240601;
    unsigned threads = default_thread_count();
    SolverOptions solver;
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
    if (!fs::is_directory(o.dir)) throw IoError("corpus directory '" + o.dir + "' does not exist");
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(o.dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) throw IoError("no .pgm images in '" + o.dir + "'");

    std::ostringstream csv;
    csv << "image,rate,psnr_init,psnr_final,ssim_final,iters,seconds\n";
    AllocationConfig alloc;
    alloc.eta = o.eta;
    for (const auto& rate_str : o.rates) {
        const Rate rate = Rate::parse(rate_str);
        double sum_init = 0, sum_final = 0, sum_ssim = 0, sum_iters = 0, sum_sec = 0;
        for (const auto& path : images) {
            const auto t0 = Clock::now();
            const Image image = guarded_io(path.string(), [&] { return read_image(path); });
            const MeasurementPlan plan = plan_for_image(image, o.block, o.levels, rate, alloc, o.seed);
            const SamplingOperator op = make_operator(plan);
            const MeasurementSet ms = sample_image(image, plan, op, o.threads);
            const ReconResult res = reconstruct(ms, op, o.solver.config(o.levels), &image, o.threads);
            const double final_psnr = psnr(image, res.image);
            const double final_ssim = ssim(image, res.image);
            const double sec = seconds_since(t0);
            csv << path.filename().string() << "," << num(rate.value()) << "," << num(res.initial_psnr) << ","
                << num(final_psnr) << "," << num(final_ssim) << "," << res.state.iter << "," << num(sec) << "\n";
            out << path.filename().string() << " rate=" << num(rate.value(), "%.4g")
                << " psnr_init=" << num(res.initial_psnr, "%.3f") << " psnr=" << num(final_psnr, "%.3f")
                << " ssim=" << num(final_ssim, "%.4f") << " iters=" << res.state.iter << "\n";
            sum_init += res.initial_psnr;
            sum_final += final_psnr;
            sum_ssim += final_ssim;
            sum_iters += res.state.iter;
            sum_sec += sec;
        }
        const double n = static_cast<double>(images.size());
        csv << "average," << num(rate.value()) << "," << num(sum_init / n) << "," << num(sum_final / n) << ","
            << num(sum_ssim / n) << "," << num(sum_iters / n) << "," << num(sum_sec / n) << "\n";
    }
    const std::string text = csv.str();
    guarded_io(o.out, [&] { write_file(o.out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())); });
    return kOk;
}

std::vector<std::string> load_manifest_argv(const std::string& path) {
    require_file(path);
    std::ifstream f(path);
    json m;
    try {
        f >> m;
        return m.at("argv").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw IoError("malformed manifest '" + path + "': " + e.what());
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wavelet-domain compressed sensing: adaptive sampling and tree-sparse reconstruction", "wcs"};
    app.require_subcommand(1);

    SampleOptions so;
    auto* sample = app.add_subcommand("sample", "sample a PGM image into a WCS1 measurement stream");
    sample->add_option("--in", so.in, "input PGM (P5)")->required();
    sample->add_option("--out", so.out, "output .wcs stream")->required();
    sample->add_option("--rate", so.rate, "sampling rate in (0,1], decimal or p/q")->capture_default_str();
    sample->add_option("--block", so.block, "block size n (power of two)")->capture_default_str();
    sample->add_option("--levels", so.levels, "wavelet levels l")->capture_default_str();
    sample->add_option("--eta", so.eta, "sigma/mu blend for allocation weights")->capture_default_str();
    sample->add_option("--cap-fraction", so.cap_fraction, "LL cap as a fraction of n_LL^2")->capture_default_str();
    sample->add_option("--bias", so.bias, "per-subband integer bias (canonical order, sums to 0)");
    sample->add_option("--seed", so.seed, "operator seed")->capture_default_str();
    sample->add_option("--threads", so.threads, "worker threads")->capture_default_str();
    sample->add_option("--manifest", so.manifest, "manifest path (default <out>.manifest.json)");

    ReconstructOptions ro;
    auto* recon = app.add_subcommand("reconstruct", "reconstruct a PGM image from a WCS1 stream");
    recon->add_option("--in", ro.in, "input .wcs stream")->required();
    recon->add_option("--out", ro.out, "output PGM")->required();
    recon->add_option("--diag", ro.diag, "per-iteration CSV diagnostics");
    recon->add_option("--ref", ro.ref, "ground-truth PGM for PSNR diagnostics");
    recon->add_option("--threads", ro.threads, "worker threads")->capture_default_str();
    recon->add_option("--manifest", ro.manifest, "manifest path (default <out>.manifest.json)");
    ro.solver.add_to(*recon);

    std::string ref_path, test_path;
    auto* eval = app.add_subcommand("evaluate", "PSNR and SSIM between two PGM images");
    eval->add_option("--ref", ref_path)->required();
    eval->add_option("--test", test_path)->required();

    BenchOptions bo;
    auto* bench = app.add_subcommand("bench", "sample and reconstruct every PGM in a directory at several rates");
    bench->add_option("--dir", bo.dir, "corpus directory")->required();
    bench->add_option("--rates", bo.rates, "comma-separated rates")->delimiter(',')->capture_default_str();
    bench->add_option("--out", bo.out, "output CSV")->required();
    bench->add_option("--block", bo.block)->capture_default_str();
    bench->add_option("--levels", bo.levels)->capture_default_str();
    bench->add_option("--eta", bo.eta)->capture_default_str();
    bench->add_option("--seed", bo.seed)->capture_default_str();
    bench->add_option("--threads", bo.threads)->capture_default_str();
    bo.solver.add_to(*bench);

    std::string manifest_path;
    auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    replay->add_option("--manifest", manifest_path)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageOrIo;
    }

    try {
        if (sample->parsed()) return cmd_sample(so, out);
        if (recon->parsed()) return cmd_reconstruct(ro, out);
        if (eval->parsed()) return cmd_evaluate(ref_path, test_path, out);
        if (bench->parsed()) return cmd_bench(bo, out);
        if (replay->parsed()) {
            const auto recorded = load_manifest_argv(manifest_path);
            if (!recorded.empty() && recorded.front() == "replay") throw ArgumentError("manifest records a replay");
            return run(recorded, out, err);
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kNumericFailure;
    } catch (const FormatError& e) {
        err << "error: format: " << e.what() << "\n";
        return kUsageOrIo;
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIo;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIo;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kNumericFailure;
    }
    return kUsageOrIo;
}

}  // namespace wcs::cli
