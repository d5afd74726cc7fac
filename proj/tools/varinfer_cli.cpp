// varinfer: sparse VAR estimation with simultaneous bootstrap inference.
//
// Subcommands: simulate | preprocess | fit | infer | tune | experiment.
// Exit codes: 0 success, 2 input/config error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varinfer/serialize.hpp"

using namespace varinfer;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw ConfigError("cannot open input file: " + path);
}

InnovationSpec make_spec(const std::string& family, const std::string& variant,
                         int d, const Matrix& mixing, std::uint64_t seed) {
    InnovationSpec spec;
    try {
        spec.family = family_from_name(family);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (variant == "halfsplit") {
        spec.variant = NonstationaryVariant::halfsplit;
    } else if (variant == "parity") {
        spec.variant = NonstationaryVariant::parity;
    } else {
        throw ConfigError("unknown nonstationary variant: " + variant);
    }
    spec.d = d;
    spec.mixing = mixing;
    spec.seed = seed;
    return spec;
}

KernelSpec make_kernel(const std::string& kernel_name, double k_T,
                       const std::string& kernel_table) {
    if (kernel_name == "gaussian") return KernelSpec::gaussian(k_T);
    if (kernel_name == "user_tabulated") {
        if (kernel_table.empty()) {
            throw ConfigError("--kernel-table is required with --kernel user_tabulated");
        }
        require_readable(kernel_table);
        const Matrix tab = read_csv_file(kernel_table);
        if (tab.cols() != 2) throw ConfigError("kernel table must have two columns: x, K(x)");
        std::vector<double> xs, ks;
        for (Eigen::Index i = 0; i < tab.rows(); ++i) {
            xs.push_back(tab(i, 0));
            ks.push_back(tab(i, 1));
        }
        return KernelSpec::tabulated(std::move(xs), std::move(ks), k_T);
    }
    throw ConfigError("unknown kernel: " + kernel_name);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
    std::string scenario = "var1";
    std::string family = "independent";
    std::string variant = "halfsplit";
    std::string model_file;
    int d = 10;
    int T = 500;
    int p_hint = 0;  // informational; order comes from the scenario/model
    std::uint64_t seed = 1;
    std::string output;
};

int cmd_simulate(const SimulateOpts& o) {
    VarModel model;
    Matrix mixing;
    if (!o.model_file.empty()) {
        require_readable(o.model_file);
        model = model_from_json(read_json_file(o.model_file));
        mixing = Matrix::Identity(model.dim(), model.dim());
    } else if (o.scenario == "example") {
        model = example_model();
        mixing = example_mixing();
    } else {
        model = standard_scenario(scenario_from_name(o.scenario), o.d);
        mixing = standard_mixing(o.d);
    }
    const InnovationSpec spec =
        make_spec(o.family, o.variant, model.dim(), mixing, o.seed);
    const Matrix x = generate_var(model, spec, o.T);

    std::vector<std::string> header;
    for (int j = 1; j <= model.dim(); ++j) header.push_back("x" + std::to_string(j));
    write_csv_file(o.output, x, header);

    Json sidecar;
    sidecar["version"] = library_version;
    sidecar["config"] = {{"command", "simulate"},
                         {"scenario", o.model_file.empty() ? o.scenario : "custom"},
                         {"family", o.family},
                         {"variant", o.variant},
                         {"d", model.dim()},
                         {"T", o.T},
                         {"seed", o.seed},
                         {"output", o.output}};
    sidecar["model"] = model_to_json(model);
    sidecar["mixing"] = matrix_to_json(mixing);
    sidecar["rng"] = Rng::algorithm();
    write_json_file(o.output + ".json", sidecar);
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess: per-column natural log, then OLS linear detrend in time.
// ---------------------------------------------------------------------------

struct PreprocessOpts {
    std::string input, output;
};

int cmd_preprocess(const PreprocessOpts& o) {
    require_readable(o.input);
    std::vector<std::string> header;
    Matrix x = read_csv_file(o.input, &header);
    const int T = static_cast<int>(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (!(x(i, j) > 0.0)) {
                throw ConfigError("nonpositive entry at row " + std::to_string(i + 1) +
                                  ", column " + std::to_string(j + 1) +
                                  ": log transform requires positive data");
            }
        }
    }
    x = x.array().log();
    // regress each column on (1, t), t = 1..T, and keep the residual
    Vector t(T);
    for (int i = 0; i < T; ++i) t(i) = i + 1;
    const double t_mean = t.mean();
    const double t_ss = (t.array() - t_mean).square().sum();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double y_mean = x.col(j).mean();
        const double slope =
            ((t.array() - t_mean) * (x.col(j).array() - y_mean)).sum() / t_ss;
        x.col(j).array() -= y_mean + slope * (t.array() - t_mean);
    }
    if (header.empty()) {
        for (Eigen::Index j = 1; j <= x.cols(); ++j) {
            header.push_back("x" + std::to_string(j));
        }
    }
    write_csv_file(o.output, x, header);
    Json sidecar;
    sidecar["version"] = library_version;
    sidecar["config"] = {{"command", "preprocess"}, {"input", o.input}, {"output", o.output}};
    sidecar["transform"] = "log + linear detrend";
    write_json_file(o.output + ".json", sidecar);
    return 0;
}

// ---------------------------------------------------------------------------
// tune / fit
// ---------------------------------------------------------------------------

struct FitOpts {
    std::string input, output;
    int p = 0;       // 0: select by AIC up to p_max
    int p_max = 5;
    double lambda = -1.0;  // < 0: tune
    double b_T = -1.0;
    std::vector<double> lambda_grid, bt_grid;
};

int run_tuning_pipeline(const FitOpts& o, Matrix& x, int& p, TuningReport& tuning,
                        bool& tuned) {
    require_readable(o.input);
    x = read_csv_file(o.input);
    p = o.p > 0 ? o.p : select_order_aic(x, o.p_max);
    tuned = o.lambda < 0.0 || o.b_T < 0.0;
    if (tuned) {
        tuning = tune_lambda_threshold(
            x, p, o.lambda_grid.empty() ? default_lambda_grid() : o.lambda_grid,
            o.bt_grid.empty() ? default_bt_grid() : o.bt_grid);
    } else {
        tuning.p = p;
        tuning.lambda = o.lambda;
        tuning.b_T = o.b_T;
    }
    return 0;
}

int cmd_tune(const FitOpts& o) {
    Matrix x;
    int p = 0;
    TuningReport tuning;
    bool tuned = false;
    FitOpts forced = o;
    forced.lambda = -1.0;
    forced.b_T = -1.0;
    run_tuning_pipeline(forced, x, p, tuning, tuned);
    const DesignSystem design = build_design(x, p);
    const PostSelectionFit fit =
        post_selection_fit(design, tuning.lambda, tuning.b_T);
    tuning.entry_bandwidths = bandwidth_report(fit, design).entry_bandwidths;
    tuning.k_T = select_bandwidth(fit, design);

    Json out;
    out["version"] = library_version;
    out["config"] = {{"command", "tune"}, {"input", o.input}, {"p", o.p},
                     {"p_max", o.p_max}, {"output", o.output}};
    out["tuning"] = tuning_to_json(tuning);
    write_json_file(o.output, out);
    return 0;
}

int cmd_fit(const FitOpts& o) {
    Matrix x;
    int p = 0;
    TuningReport tuning;
    bool tuned = false;
    run_tuning_pipeline(o, x, p, tuning, tuned);
    const PostSelectionFit fit = post_selection_fit(x, p, tuning.lambda, tuning.b_T);

    Json out;
    out["version"] = library_version;
    out["config"] = {{"command", "fit"},   {"input", o.input}, {"p", o.p},
                     {"p_max", o.p_max},   {"lambda", o.lambda}, {"bt", o.b_T},
                     {"output", o.output}};
    out["selected_p"] = p;
    out["tuned"] = tuned;
    if (tuned) out["tuning"] = tuning_to_json(tuning);
    out["fit"] = fit_to_json(fit);
    write_json_file(o.output, out);
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferOpts {
    std::string input, fit_file, output, hypothesis;
    std::string kernel = "gaussian";
    std::string kernel_table;
    double k_T = -1.0;  // < 0: flat-top rule
    int B = 500;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    bool with_sieve = false;
};

int cmd_infer(const InferOpts& o) {
    require_readable(o.input);
    require_readable(o.fit_file);
    const Matrix x = read_csv_file(o.input);
    const Json fit_json = read_json_file(o.fit_file);
    const PostSelectionFit fit =
        fit_from_json(fit_json.contains("fit") ? fit_json.at("fit") : fit_json);
    const DesignSystem design = build_design(x, fit.p);
    if (design.T != fit.T || design.d != fit.d) {
        throw ConfigError("fit file does not match the input series dimensions");
    }

    const double k_T = o.k_T > 0.0 ? o.k_T : select_bandwidth(fit, design);
    const KernelSpec kernel = make_kernel(o.kernel, k_T, o.kernel_table);
    const BootstrapDraws draws = wild_bootstrap(fit, design, kernel, o.B, o.alpha, o.seed);
    const SimultaneousCi ci = simultaneous_ci(fit, draws.c_star, fit.T);

    Json out;
    out["version"] = library_version;
    out["config"] = {{"command", "infer"},   {"input", o.input},
                     {"fit", o.fit_file},    {"kernel", o.kernel},
                     {"kt", o.k_T},          {"B", o.B},
                     {"alpha", o.alpha},     {"seed", o.seed},
                     {"hypothesis", o.hypothesis}, {"output", o.output}};
    out["k_T"] = k_T;
    out["bootstrap"] = draws_to_json(draws, /*include_psi=*/false);
    out["c_star"] = draws.c_star;
    out["half_width"] = ci.half_width;
    Json intervals = Json::array();
    for (const CoefficientInterval& iv : ci.intervals) {
        intervals.push_back({{"lag", iv.lag},
                             {"row", iv.row},
                             {"col", iv.col},
                             {"estimate", iv.estimate},
                             {"lower", iv.lower},
                             {"upper", iv.upper}});
    }
    out["intervals"] = std::move(intervals);
    if (!o.hypothesis.empty()) {
        require_readable(o.hypothesis);
        const VarModel hypothesized = model_from_json(read_json_file(o.hypothesis));
        const ExactTestResult test = exact_test(fit, hypothesized, draws.c_star, fit.T);
        out["exact_test"] = {{"statistic", test.statistic},
                             {"critical_value", draws.c_star},
                             {"reject", test.reject}};
    }
    if (o.with_sieve) {
        const BootstrapDraws sieve = ar_sieve_bootstrap(fit, x, o.B, o.alpha, o.seed);
        out["sieve"] = draws_to_json(sieve, false);
    }
    write_json_file(o.output, out);

    std::printf("simultaneous %g%% confidence band: C* = %s, half-width = %s (%zu intervals)\n",
                100.0 * (1.0 - o.alpha), format_double(draws.c_star).c_str(),
                format_double(ci.half_width).c_str(), ci.intervals.size());
    if (out.contains("exact_test")) {
        std::printf("exact test: statistic = %s, critical = %s -> %s\n",
                    format_double(out["exact_test"]["statistic"].get<double>()).c_str(),
                    format_double(out["exact_test"]["critical_value"].get<double>()).c_str(),
                    out["exact_test"]["reject"].get<bool>() ? "reject" : "fail to reject");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// experiment: generate -> tune -> fit -> bootstrap -> evaluate, replicated.
// ---------------------------------------------------------------------------

struct ExperimentOpts {
    std::string scenario = "var1";
    std::string family = "independent";
    std::string variant = "halfsplit";
    int d = 10;
    int T = 500;
    int p = 1;
    int B = 500;
    int replicates = 200;
    double alpha = 0.05;
    double lambda = -1.0;  // < 0: tune per replicate
    double b_T = -1.0;
    std::uint64_t seed = 1;
    bool paper_scale = false;
    bool with_sieve = true;
    std::string output;
};

struct ReplicateRow {
    double c1_post, c2_post, kappa_post;
    double c1_lasso, c2_lasso, kappa_lasso;
    double lambda, b_T, k_T;
    double wild_length, wild_cover;
    double sieve_length, sieve_cover;
};

int cmd_experiment(ExperimentOpts o) {
    if (o.paper_scale) {
        o.d = 80;
        o.T = 1500;
        o.replicates = 300;
        o.B = 1000;
    }
    VarModel model;
    Matrix mixing;
    if (o.scenario == "example") {
        model = example_model();
        mixing = example_mixing();
        o.d = model.dim();
    } else {
        model = standard_scenario(scenario_from_name(o.scenario), o.d);
        mixing = standard_mixing(o.d);
    }
    o.p = model.order();
    const Matrix truth = model.stacked();

    const std::string raw_path = o.output + ".raw.csv";
    std::ofstream raw(raw_path);
    if (!raw) throw ConfigError("cannot open for writing: " + raw_path);
    raw << "replicate,lambda,b_T,k_T,c1_post,c2_post,kappa_post,"
           "c1_lasso,c2_lasso,kappa_lasso,"
           "wild_length,wild_cover,sieve_length,sieve_cover\n";

    std::vector<ReplicateRow> rows;
    for (int r = 0; r < o.replicates; ++r) {
        const InnovationSpec spec = make_spec(
            o.family, o.variant, o.d, mixing, o.seed + static_cast<std::uint64_t>(r));
        const Matrix x = generate_var(model, spec, o.T);

        double lambda = o.lambda, b_T = o.b_T;
        if (lambda < 0.0 || b_T < 0.0) {
            const TuningReport tuning =
                tune_lambda_threshold(x, o.p, default_lambda_grid(), default_bt_grid());
            lambda = tuning.lambda;
            b_T = tuning.b_T;
        }
        const DesignSystem design = build_design(x, o.p);
        const PostSelectionFit fit = post_selection_fit(design, lambda, b_T);
        const double k_T = select_bandwidth(fit, design);
        const BootstrapDraws wild = wild_bootstrap(
            fit, design, KernelSpec::gaussian(k_T), o.B, o.alpha,
            o.seed + static_cast<std::uint64_t>(r));

        ReplicateRow row{};
        row.lambda = lambda;
        row.b_T = b_T;
        row.k_T = k_T;
        const FitMetrics post = evaluate_fit(fit.refit_S, truth);
        row.c1_post = post.c1;
        row.c2_post = post.c2;
        row.kappa_post = post.kappa;
        const Matrix lasso = comparator_fit(x, o.p, ComparatorMethod::column_lasso, lambda);
        const FitMetrics lm = evaluate_fit(lasso, truth);
        row.c1_lasso = lm.c1;
        row.c2_lasso = lm.c2;
        row.kappa_lasso = lm.kappa;

        const double stat =
            std::sqrt(static_cast<double>(fit.T)) * (fit.refit_S - truth).cwiseAbs().maxCoeff();
        row.wild_length = 2.0 * wild.c_star / std::sqrt(static_cast<double>(fit.T));
        row.wild_cover = stat <= wild.c_star ? 1.0 : 0.0;
        if (o.with_sieve) {
            const BootstrapDraws sieve = ar_sieve_bootstrap(
                fit, x, o.B, o.alpha, o.seed + static_cast<std::uint64_t>(r));
            row.sieve_length = 2.0 * sieve.c_star / std::sqrt(static_cast<double>(fit.T));
            row.sieve_cover = stat <= sieve.c_star ? 1.0 : 0.0;
        }
        rows.push_back(row);

        raw << r << ',' << format_double(row.lambda) << ',' << format_double(row.b_T)
            << ',' << format_double(row.k_T) << ',' << format_double(row.c1_post) << ','
            << format_double(row.c2_post) << ',' << format_double(row.kappa_post) << ','
            << format_double(row.c1_lasso) << ',' << format_double(row.c2_lasso) << ','
            << format_double(row.kappa_lasso) << ',' << format_double(row.wild_length)
            << ',' << format_double(row.wild_cover) << ','
            << format_double(row.sieve_length) << ',' << format_double(row.sieve_cover)
            << '\n';
        raw.flush();  // partial results survive interruption
    }

    auto mean = [&](double ReplicateRow::*field) {
        double acc = 0.0;
        for (const ReplicateRow& row : rows) acc += row.*field;
        return acc / static_cast<double>(rows.size());
    };

    std::ofstream table(o.output);
    if (!table) throw ConfigError("cannot open for writing: " + o.output);
    table << "method,C1,C2,kappa,coverage,length\n";
    table << "post_selection," << format_double(mean(&ReplicateRow::c1_post)) << ','
          << format_double(mean(&ReplicateRow::c2_post)) << ','
          << format_double(mean(&ReplicateRow::kappa_post)) << ','
          << format_double(mean(&ReplicateRow::wild_cover)) << ','
          << format_double(mean(&ReplicateRow::wild_length)) << '\n';
    table << "lasso," << format_double(mean(&ReplicateRow::c1_lasso)) << ','
          << format_double(mean(&ReplicateRow::c2_lasso)) << ','
          << format_double(mean(&ReplicateRow::kappa_lasso)) << ",,\n";
    if (o.with_sieve) {
        table << "sieve,,,," << format_double(mean(&ReplicateRow::sieve_cover)) << ','
              << format_double(mean(&ReplicateRow::sieve_length)) << '\n';
    }
    table.close();

    Json sidecar;
    sidecar["version"] = library_version;
    sidecar["config"] = {{"command", "experiment"}, {"scenario", o.scenario},
                         {"family", o.family},      {"variant", o.variant},
                         {"d", o.d},                {"T", o.T},
                         {"p", o.p},                {"B", o.B},
                         {"replicates", o.replicates}, {"alpha", o.alpha},
                         {"lambda", o.lambda},      {"bt", o.b_T},
                         {"seed", o.seed},          {"paper_scale", o.paper_scale},
                         {"output", o.output}};
    sidecar["raw"] = raw_path;
    write_json_file(o.output + ".json", sidecar);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse VAR estimation with simultaneous bootstrap inference"};
    app.require_subcommand(1);

    SimulateOpts sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic series");
    simulate->add_option("--scenario", sim.scenario,
                         "var1 | var2 | var3 | example");
    simulate->add_option("--model", sim.model_file, "JSON model file (overrides --scenario)");
    simulate->add_option("--family", sim.family,
                         "independent | product_normal | product_triple | nonstationary");
    simulate->add_option("--variant", sim.variant, "halfsplit | parity");
    simulate->add_option("--d", sim.d, "dimension");
    simulate->add_option("--T", sim.T, "series length");
    simulate->add_option("--p", sim.p_hint, "ignored; order comes from the scenario");
    simulate->add_option("--seed", sim.seed, "RNG seed");
    simulate->add_option("--output", sim.output, "output CSV path")->required();

    PreprocessOpts pre;
    CLI::App* preprocess =
        app.add_subcommand("preprocess", "Columnwise log transform and linear detrend");
    preprocess->add_option("--input", pre.input)->required();
    preprocess->add_option("--output", pre.output)->required();

    FitOpts fo;
    CLI::App* fit = app.add_subcommand("fit", "Post-selection estimate of the coefficients");
    fit->add_option("--input", fo.input)->required();
    fit->add_option("--output", fo.output)->required();
    fit->add_option("--p", fo.p, "model order (0: select by information criterion)");
    fit->add_option("--p-max", fo.p_max, "largest order candidate");
    fit->add_option("--lambda", fo.lambda, "Lasso penalty (omit to tune)");
    fit->add_option("--bt", fo.b_T, "selection threshold (omit to tune)");
    fit->add_option("--lambda-grid", fo.lambda_grid, "tuning grid for lambda");
    fit->add_option("--bt-grid", fo.bt_grid, "tuning grid for the threshold");

    FitOpts to;
    CLI::App* tune = app.add_subcommand("tune", "Grid-tune lambda, threshold, and bandwidth");
    tune->add_option("--input", to.input)->required();
    tune->add_option("--output", to.output)->required();
    tune->add_option("--p", to.p, "model order (0: select by information criterion)");
    tune->add_option("--p-max", to.p_max, "largest order candidate");
    tune->add_option("--lambda-grid", to.lambda_grid, "tuning grid for lambda");
    tune->add_option("--bt-grid", to.bt_grid, "tuning grid for the threshold");

    InferOpts io;
    CLI::App* infer = app.add_subcommand("infer", "Simultaneous intervals and exact test");
    infer->add_option("--input", io.input, "series CSV used for the fit")->required();
    infer->add_option("--fit", io.fit_file, "fit JSON from the fit subcommand")->required();
    infer->add_option("--output", io.output)->required();
    infer->add_option("--kernel", io.kernel, "gaussian | user_tabulated");
    infer->add_option("--kernel-table", io.kernel_table, "CSV of (x, K(x)) rows");
    infer->add_option("--kt", io.k_T, "kernel bandwidth (omit for the flat-top rule)");
    infer->add_option("--B", io.B, "bootstrap replicates");
    infer->add_option("--alpha", io.alpha, "simultaneous level");
    infer->add_option("--seed", io.seed, "RNG seed");
    infer->add_option("--hypothesis", io.hypothesis, "JSON model file for the exact test");
    infer->add_flag("--sieve", io.with_sieve, "also run the residual-resampling comparator");

    ExperimentOpts eo;
    CLI::App* experiment =
        app.add_subcommand("experiment", "Replicated generate/tune/fit/bootstrap study");
    experiment->add_option("--scenario", eo.scenario, "var1 | var2 | var3 | example");
    experiment->add_option("--family", eo.family);
    experiment->add_option("--variant", eo.variant);
    experiment->add_option("--d", eo.d);
    experiment->add_option("--T", eo.T);
    experiment->add_option("--B", eo.B);
    experiment->add_option("--replicates", eo.replicates);
    experiment->add_option("--alpha", eo.alpha);
    experiment->add_option("--lambda", eo.lambda, "fixed penalty (omit to tune per replicate)");
    experiment->add_option("--bt", eo.b_T, "fixed threshold (omit to tune per replicate)");
    experiment->add_option("--seed", eo.seed);
    experiment->add_flag("--paper-scale", eo.paper_scale,
                         "d = 80, T = 1500, 300 replicates, B = 1000");
    experiment->add_flag("!--no-sieve", eo.with_sieve, "skip the comparator bootstrap");
    experiment->add_option("--output", eo.output)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*preprocess) return cmd_preprocess(pre);
        if (*fit) return cmd_fit(fo);
        if (*tune) return cmd_tune(to);
        if (*infer) return cmd_infer(io);
        if (*experiment) return cmd_experiment(eo);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << '\n';
        // I/O problems are configuration errors; anything else is numerical
        return what.find("cannot open") != std::string::npos ||
                       what.find("write failed") != std::string::npos ||
                       what.find("CSV") != std::string::npos
                   ? 2
                   : 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
