#include "convreg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "convreg/optimizer.hpp"
#include "convreg/regularizers.hpp"
#include "convreg/spectral.hpp"
#include "convreg/structured_matrix.hpp"
#include "convreg/validation.hpp"

namespace convreg::cli {

namespace {

/// A user-facing problem with the inputs; reported without a stack of context.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_number_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw UsageError(std::string(flag) + ": bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

KernelShape parse_kernel_shape(const std::string& text) {
    const auto v = parse_number_list(text, "--kernel-shape");
    if (v.size() != 4) throw UsageError("--kernel-shape expects k,k,g,h");
    for (double x : v)
        if (!(x >= 1.0) || x != static_cast<double>(static_cast<std::size_t>(x)))
            throw UsageError("--kernel-shape entries must be positive integers");
    if (v[0] != v[1]) throw UsageError("--kernel-shape: only square k x k filters are supported");
    return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[2]), static_cast<std::size_t>(v[3])};
}

struct KernelSource {
    std::string shape;
    std::string init = "uniform01";
    std::string file;
    std::uint64_t seed = 1;

    void add_to(CLI::App& app) {
        app.add_option("--kernel-shape", shape, "Kernel shape k,k,g,h (default 3,3,1,1)");
        app.add_option("--init", init, "Kernel initialization")->check(CLI::IsMember({"uniform01", "file"}));
        app.add_option("--kernel-file", file, "Kernel tensor file (with --init file)");
        app.add_option("--seed", seed, "Seed for uniform01 initialization");
    }

    KernelTensor resolve() const {
        if (init == "file" || (!file.empty() && shape.empty())) {
            if (file.empty()) throw UsageError("--init file requires --kernel-file");
            KernelTensor kernel = load_kernel(file);
            if (!shape.empty() && parse_kernel_shape(shape) != kernel.shape())
                throw UsageError(file + ": kernel shape does not match --kernel-shape");
            return kernel;
        }
        return init_kernel(shape.empty() ? KernelShape{3, 1, 1} : parse_kernel_shape(shape), seed,
                           InitScheme::uniform01);
    }
};

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    fn(os);
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- run

struct RunArgs {
    KernelSource source;
    std::size_t input_size = 20;
    std::string reg = "frob";
    std::optional<double> lr;
    int iters = 100;
    std::string out_trace;
    std::string out_kernel;
    std::string out_summary;
    std::string svd = "dense";
    double gap_threshold = kDefaultGapThreshold;
    int trace_every = 1;
    std::string export_mm;
    std::string sigma_band;
    double grad_tol = 0.0;
    std::string config;
};

void add_run_options(CLI::App& app, RunArgs& a) {
    a.source.add_to(app);
    app.add_option("--input-size", a.input_size, "Spatial input size N")->check(CLI::PositiveNumber);
    app.add_option("--reg", a.reg, "Penalty")->check(CLI::IsMember({"frob", "sigma-min", "combined"}));
    app.add_option("--lr", a.lr, "Step size (default 1e-4 for sigma-min, 1e-5 otherwise)");
    app.add_option("--iters", a.iters, "Maximum number of updates")->check(CLI::NonNegativeNumber);
    app.add_option("--out-trace", a.out_trace, "Trace CSV path");
    app.add_option("--out-kernel", a.out_kernel, "Final kernel path");
    app.add_option("--out-summary", a.out_summary, "JSON summary path");
    app.add_option("--svd", a.svd, "Singular value backend")->check(CLI::IsMember({"dense", "iterative"}));
    app.add_option("--gap-threshold", a.gap_threshold, "Relative gap below which sigma_min counts as repeated");
    app.add_option("--trace-every", a.trace_every, "Record every n-th iteration")->check(CLI::PositiveNumber);
    app.add_option("--export-mm", a.export_mm, "Write M of the final kernel in Matrix Market format");
    auto* band = app.add_option("--sigma-band", a.sigma_band, "Stop once sigma_min >= lo and sigma_max <= hi (lo,hi)");
    app.add_option("--grad-tol", a.grad_tol, "Stop once the gradient norm is at or below this value")->excludes(band);
    app.add_option("--config", a.config, "File of `key = value` lines named like the flags; flags win");
}

nlohmann::json summary_json(const RunResult& res, const KernelTensor& initial, std::size_t N, const GdConfig& cfg) {
    const auto& records = res.trace.records;
    auto state = [&](const KernelTensor& kernel) {
        const ExtremePairs pairs = spectrum(kernel, N, cfg.svd);
        return TraceRecord{0, penalty_value(kernel, N, cfg.kind, pairs), pairs.max.sigma, pairs.min.sigma, 0.0, 0.0};
    };
    const TraceRecord first = !records.empty() && records.front().iter == 0 ? records.front() : state(initial);
    const TraceRecord last =
        res.status != RunStatus::degenerate_sigma && !records.empty() ? records.back() : state(res.kernel);

    nlohmann::json j;
    j["initial_sigma_max"] = first.sigma_max;
    j["initial_sigma_min"] = first.sigma_min;
    j["initial_penalty"] = first.penalty;
    j["final_sigma_max"] = last.sigma_max;
    j["final_sigma_min"] = last.sigma_min;
    j["final_penalty"] = last.penalty;
    j["iters"] = res.updates;
    j["status"] = std::string(to_string(res.status));
    if (!res.message.empty()) j["message"] = res.message;
    return j;
}

int run_command(const RunArgs& a, std::ostream& out, std::ostream& err) {
    const KernelTensor initial = a.source.resolve();

    GdConfig cfg;
    cfg.kind = *parse_penalty_kind(a.reg);
    cfg.lr = a.lr.value_or(cfg.kind == PenaltyKind::NegSigmaMin ? 1e-4 : 1e-5);
    cfg.max_iters = a.iters;
    cfg.trace_every = a.trace_every;
    cfg.seed = a.source.seed;
    cfg.svd = a.svd == "iterative" ? SvdBackend::iterative : SvdBackend::dense;
    cfg.gap_threshold = a.gap_threshold;
    if (!a.sigma_band.empty()) {
        const auto band = parse_number_list(a.sigma_band, "--sigma-band");
        if (band.size() != 2) throw UsageError("--sigma-band expects lo,hi");
        cfg.stop = SigmaBand{band[0], band[1]};
    } else if (a.grad_tol > 0.0) {
        cfg.stop = GradNormBelow{a.grad_tol};
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const RunResult res = run(initial, a.input_size, cfg);
    const nlohmann::json summary = summary_json(res, initial, a.input_size, cfg);

    if (!a.out_trace.empty()) write_file(a.out_trace, [&](std::ostream& os) { res.trace.write_csv(os); });
    if (!a.out_kernel.empty()) save_kernel(a.out_kernel, res.kernel);
    if (!a.out_summary.empty()) write_file(a.out_summary, [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    if (!a.export_mm.empty()) save_matrix_market(a.export_mm, build_multi(res.kernel, a.input_size));

    out << summary.dump(2) << '\n';
    if (res.status == RunStatus::degenerate_sigma) {
        err << "convreg run: " << res.message << '\n';
        return kDegenerateSigma;
    }
    return kOk;
}

/// Fills options not given on the command line from a `key = value` file.
/// Blank lines and lines starting with `#` or `;` are skipped.
void apply_config_file(CLI::App& app, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file '" + path + "'");
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#' || line[first] == ';') continue;
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\"");
            const auto e = s.find_last_not_of(" \t\r\"");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = eq == std::string::npos ? std::string{} : trim(line.substr(0, eq));
        const std::string where = path + ":" + std::to_string(lineno);
        if (key.empty()) throw UsageError(where + ": expected key = value");
        if (key == "config") throw UsageError(where + ": nested config files are not supported");
        CLI::Option* opt = nullptr;
        try {
            opt = app.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw UsageError(where + ": unknown key '" + key + "'");
        }
        if (opt->count() > 0) continue;
        opt->add_result(trim(line.substr(eq + 1)));
        try {
            opt->run_callback();
        } catch (const CLI::ParseError& e) {
            throw UsageError(where + ": " + e.what());
        }
    }
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    std::size_t grid_max_n = 8;
    int trials = 20;
    int kernels = 20;
    std::uint64_t seed = 7;
};

int verify_command(const VerifyArgs& a, std::ostream& out) {
    VerifyOptions opt;
    opt.grid_max_n = a.grid_max_n;
    opt.matvec_trials = a.trials;
    opt.gradient_kernels = a.kernels;
    opt.seed = a.seed;
    const auto results = run_verify(opt);
    print_report(out, results);
    for (const auto& r : results)
        if (!r.pass) return kVerifyFailed;
    return kOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
    KernelSource source;
    std::size_t input_size = 20;
    std::string svd = "dense";
    double gap_threshold = kDefaultGapThreshold;
    std::string export_mm;
};

int inspect_command(const InspectArgs& a, std::ostream& out) {
    const KernelTensor kernel = a.source.resolve();
    const StructuredMatrix M = build_multi(kernel, a.input_size);
    const BlockBandwidth bw = block_bandwidth(M);
    const ExtremePairs pairs =
        spectrum(kernel, a.input_size, a.svd == "iterative" ? SvdBackend::iterative : SvdBackend::dense);
    const Simplicity simple = simplicity_check(pairs.min, a.gap_threshold, pairs.max.sigma);

    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "kernel: " << kernel.k() << "x" << kernel.k() << "x" << kernel.g() << "x" << kernel.h() << '\n';
    out << "M: " << M.rows() << "x" << M.cols() << '\n';
    out << "nnz: " << M.nnz() << '\n';
    out << "blocks: " << kernel.h() << "x" << kernel.g() << " of " << M.dims().plane() << "x" << M.dims().plane() << '\n';
    out << "block bandwidth (lower/upper): outer " << bw.outer_lower << "/" << bw.outer_upper << ", inner "
        << bw.inner_lower << "/" << bw.inner_upper << '\n';
    out << "sigma_max: " << pairs.max.sigma << '\n';
    out << "sigma_min: " << pairs.min.sigma << '\n';
    out << "sigma_min gap: " << pairs.min.gap << '\n';
    out << "sigma_min simple: " << (simple == Simplicity::simple ? "yes" : "no") << '\n';
    out << "frobenius_sq: " << frobenius_norm_sq(M) << '\n';
    if (!a.export_mm.empty()) {
        save_matrix_market(a.export_mm, M);
        out << "wrote " << a.export_mm << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral regularization of convolution kernels", "convreg"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<CLI::ConfigINI>());

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Gradient descent on a penalty of the convolution matrix");
    add_run_options(*run_cmd, run_args);

    VerifyArgs verify_args;
    auto* verify_cmd = app.add_subcommand("verify", "Run the oracle suite and exit nonzero on any failure");
    verify_cmd->add_option("--grid-max-n", verify_args.grid_max_n, "Largest N in the grid (from 3)")
        ->check(CLI::Range(3, 64));
    verify_cmd->add_option("--trials", verify_args.trials, "Random inputs per matvec check")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--kernels", verify_args.kernels, "Random kernels per gradient shape")
        ->check(CLI::PositiveNumber);
    verify_cmd->add_option("--seed", verify_args.seed, "Seed of the check inputs");

    InspectArgs inspect_args;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print the structure and extreme singular values of M");
    inspect_args.source.add_to(*inspect_cmd);
    inspect_cmd->add_option("--input-size", inspect_args.input_size, "Spatial input size N")
        ->check(CLI::PositiveNumber);
    inspect_cmd->add_option("--svd", inspect_args.svd, "Singular value backend")
        ->check(CLI::IsMember({"dense", "iterative"}));
    inspect_cmd->add_option("--gap-threshold", inspect_args.gap_threshold, "Simplicity threshold");
    inspect_cmd->add_option("--export-mm", inspect_args.export_mm, "Write M in Matrix Market format");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run_cmd) {
            if (!run_args.config.empty()) apply_config_file(*run_cmd, run_args.config);
            return run_command(run_args, out, err);
        }
        if (*verify_cmd) return verify_command(verify_args, out);
        if (*inspect_cmd) return inspect_command(inspect_args, out);
    } catch (const UsageError& e) {
        err << "convreg: " << e.what() << "\n" << "Run with --help for usage.\n";
        return kFailure;
    } catch (const std::exception& e) {
        err << "convreg: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}

}  // namespace convreg::cli
