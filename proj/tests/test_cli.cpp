#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "varinfer/serialize.hpp"

using namespace varinfer;

namespace {

std::string cli_path() {
    const char* env = std::getenv("VARINFER_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string tmp(const std::string& name) { return "/tmp/varinfer_cli_" + name; }

}  // namespace

TEST_CASE("simulate writes the requested shape and is deterministic") {
    const std::string a = tmp("sim_a.csv"), b = tmp("sim_b.csv");
    REQUIRE(run("simulate --scenario var1 --d 8 --T 120 --seed 5 --output " + a) == 0);
    const std::string first_csv = slurp(a);
    const std::string first_json = slurp(a + ".json");
    REQUIRE(run("simulate --scenario var1 --d 8 --T 120 --seed 5 --output " + a) == 0);
    CHECK(slurp(a) == first_csv);
    CHECK(slurp(a + ".json") == first_json);
    REQUIRE(run("simulate --scenario var1 --d 8 --T 120 --seed 5 --output " + b) == 0);
    CHECK(slurp(b) == first_csv);  // data independent of the path
    std::vector<std::string> header;
    const Matrix x = read_csv_file(a, &header);
    CHECK(x.rows() == 120);
    CHECK(x.cols() == 8);
    CHECK(header.size() == 8);
    // different seed, different data
    REQUIRE(run("simulate --scenario var1 --d 8 --T 120 --seed 6 --output " + b) == 0);
    CHECK(slurp(a) != slurp(b));
}

TEST_CASE("simulate round trip preserves the matrix bitwise") {
    const std::string path = tmp("sim_rt.csv");
    REQUIRE(run("simulate --scenario var2 --family product_normal --d 5 --T 80 "
                "--seed 3 --output " + path) == 0);
    const Matrix x = read_csv_file(path);
    const std::string copy = tmp("sim_rt2.csv");
    std::vector<std::string> header;
    read_csv_file(path, &header);
    write_csv_file(copy, x, header);
    CHECK(slurp(path) == slurp(copy));
}

TEST_CASE("bad invocations exit with the config code") {
    CHECK(run("fit --input /nonexistent/file.csv --output " + tmp("x.json")) == 2);
    CHECK(run("simulate --scenario not_a_scenario --output " + tmp("y.csv")) == 2);
    CHECK(run("nonsense") == 2);
    CHECK(run("simulate --d 8 --T 50 --seed 1 --output /nonexistent_dir/out.csv") == 2);
}

TEST_CASE("preprocess inverts an exact exponential-linear trend") {
    const std::string in = tmp("pre_in.csv"), out = tmp("pre_out.csv");
    const int T = 40;
    Matrix x(T, 2);
    for (int t = 1; t <= T; ++t) {
        x(t - 1, 0) = std::exp(0.5 + 0.02 * t);
        x(t - 1, 1) = std::exp(-1.0 + 0.1 * t);
    }
    write_csv_file(in, x, {"a", "b"});
    REQUIRE(run("preprocess --input " + in + " --output " + out) == 0);
    const Matrix y = read_csv_file(out);
    CHECK(y.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("preprocess output has zero mean and zero slope per column") {
    const std::string in = tmp("pre2_in.csv"), out = tmp("pre2_out.csv");
    Rng rng(77);
    const int T = 60;
    Matrix x(T, 3);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < 3; ++j) {
            x(t, j) = std::exp(0.1 * (j + 1) * (t + 1) / T + 0.3 * rng.normal());
        }
    }
    write_csv_file(in, x);
    REQUIRE(run("preprocess --input " + in + " --output " + out) == 0);
    const Matrix y = read_csv_file(out);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::fabs(y.col(j).mean()) < 1e-10);
        double slope = 0.0;
        for (int t = 0; t < T; ++t) slope += (t + 1 - (T + 1) / 2.0) * y(t, j);
        CHECK(std::fabs(slope) < 1e-7);
    }
    // idempotence after undoing the log
    const std::string again_in = tmp("pre2_exp.csv"), again_out = tmp("pre2_out2.csv");
    write_csv_file(again_in, y.array().exp().matrix());
    REQUIRE(run("preprocess --input " + again_in + " --output " + again_out) == 0);
    const Matrix z = read_csv_file(again_out);
    CHECK((z - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("preprocess rejects nonpositive entries and names the cell") {
    const std::string in = tmp("pre3_in.csv");
    Matrix x = Matrix::Ones(10, 2);
    x(4, 1) = 0.0;
    write_csv_file(in, x);
    const std::string err = tmp("pre3_err.txt");
    const std::string cmd = cli_path() + " preprocess --input " + in + " --output " +
                            tmp("pre3_out.csv") + " 2>" + err + " >/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 2);
    const std::string msg = slurp(err);
    CHECK(msg.find("row 5") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
}

TEST_CASE("fit round trip and noiseless support recovery") {
    // noiseless recursion: the fitted supports and coefficients are exact
    Matrix A(3, 3);
    A << 0.5, 0.3, 0.0, 0.0, -0.4, 0.2, 0.0, 0.0, 0.6;
    Matrix x(40, 3);
    x.row(0) << 3.0, -2.0, 2.5;
    for (int t = 1; t < 40; ++t) x.row(t) = (A * x.row(t - 1).transpose()).transpose();
    const std::string in = tmp("fit_in.csv"), out = tmp("fit_out.json");
    write_csv_file(in, x);
    REQUIRE(run("fit --input " + in + " --output " + out +
                " --p 1 --lambda 1e-8 --bt 0.05") == 0);
    const Json j = read_json_file(out);
    CHECK(j.at("version").get<std::string>() == library_version);
    CHECK(j.at("config").at("command").get<std::string>() == "fit");
    const PostSelectionFit fit = fit_from_json(j.at("fit"));
    VarModel truth;
    truth.coefficients.push_back(A);
    CHECK(evaluate_fit(fit.refit_S, truth.stacked()).kappa == 0);
    CHECK((fit.refit_S - truth.stacked()).cwiseAbs().maxCoeff() < 1e-6);
    // loading and re-serializing preserves S-hat bitwise
    CHECK(matrix_to_json(fit.refit_S) == j.at("fit").at("refit_S"));
}

TEST_CASE("fit, tune, infer pipeline with determinism across thread counts") {
    const std::string data = tmp("pipe_data.csv");
    REQUIRE(run("simulate --scenario var1 --d 6 --T 300 --seed 9 --output " + data) == 0);

    const std::string fit_a = tmp("pipe_fit_a.json");
    REQUIRE(run("fit --input " + data + " --output " + fit_a + " --p 1") == 0);
    const std::string fit_bytes = slurp(fit_a);
    setenv("VAR_INFER_THREADS", "3", 1);
    REQUIRE(run("fit --input " + data + " --output " + fit_a + " --p 1") == 0);
    unsetenv("VAR_INFER_THREADS");
    CHECK(slurp(fit_a) == fit_bytes);

    const std::string inf_a = tmp("pipe_inf_a.json");
    const std::string infer_args = "infer --input " + data + " --fit " + fit_a +
                                   " --B 200 --alpha 0.05 --seed 4 --output " + inf_a;
    REQUIRE(run(infer_args) == 0);
    const std::string inf_bytes = slurp(inf_a);
    setenv("VAR_INFER_THREADS", "5", 1);
    REQUIRE(run(infer_args) == 0);
    unsetenv("VAR_INFER_THREADS");
    CHECK(slurp(inf_a) == inf_bytes);

    // interval arithmetic recheck: half-width = C*/sqrt(T) for every interval
    const Json inf = read_json_file(inf_a);
    const double c_star = inf.at("c_star").get<double>();
    const double hw = c_star / std::sqrt(300.0);
    CHECK(inf.at("half_width").get<double>() == Catch::Approx(hw).epsilon(1e-12));
    const auto& intervals = inf.at("intervals");
    CHECK(intervals.size() == 1u * 6u * 6u);
    for (const auto& iv : intervals) {
        const double lower = iv.at("lower").get<double>();
        const double upper = iv.at("upper").get<double>();
        const double est = iv.at("estimate").get<double>();
        CHECK(upper - est == Catch::Approx(hw).margin(1e-12));
        CHECK(est - lower == Catch::Approx(hw).margin(1e-12));
    }

    // tune runs and reports an in-grid choice
    const std::string tune_out = tmp("pipe_tune.json");
    REQUIRE(run("tune --input " + data + " --output " + tune_out + " --p 1") == 0);
    const Json tj = read_json_file(tune_out);
    CHECK(tj.at("tuning").at("k_T").get<double>() >= 1.0);
}

TEST_CASE("infer against the fitted model itself does not reject") {
    const std::string data = tmp("hyp_data.csv");
    REQUIRE(run("simulate --scenario var1 --d 5 --T 250 --seed 17 --output " + data) == 0);
    const std::string fit_path = tmp("hyp_fit.json");
    REQUIRE(run("fit --input " + data + " --output " + fit_path + " --p 1") == 0);
    // write the fitted coefficients out as the hypothesized model
    const PostSelectionFit fit = fit_from_json(read_json_file(fit_path).at("fit"));
    const std::string hyp = tmp("hyp_model.json");
    write_json_file(hyp, model_to_json(fit.fitted_model()));
    const std::string out = tmp("hyp_out.json");
    REQUIRE(run("infer --input " + data + " --fit " + fit_path + " --B 100 --seed 2 " +
                "--hypothesis " + hyp + " --output " + out) == 0);
    const Json j = read_json_file(out);
    CHECK(j.at("exact_test").at("statistic").get<double>() == 0.0);
    CHECK_FALSE(j.at("exact_test").at("reject").get<bool>());
}

TEST_CASE("experiment smoke run produces the table and raw replicates") {
    const std::string out = tmp("exp_table.csv");
    REQUIRE(run("experiment --scenario var1 --d 4 --T 120 --replicates 2 --B 50 "
                "--lambda 0.05 --bt 0.1 --seed 11 --output " + out) == 0);
    std::vector<std::string> header;
    const Matrix raw = read_csv_file(out + ".raw.csv", &header);
    REQUIRE(raw.rows() == 2);
    REQUIRE(header.size() == 14);
    CHECK(raw.allFinite());

    std::ifstream table(out);
    REQUIRE(table);
    std::string line;
    std::getline(table, line);
    CHECK(line == "method,C1,C2,kappa,coverage,length");
    std::getline(table, line);
    CHECK(line.rfind("post_selection,", 0) == 0);

    // aggregate means equal the column means of the raw file
    std::stringstream first_row(line.substr(std::string("post_selection,").size()));
    std::string cell;
    std::getline(first_row, cell, ',');
    const double c1_mean = std::stod(cell);
    CHECK(c1_mean == Catch::Approx(raw.col(4).mean()).epsilon(1e-12));

    // reruns are byte-identical
    const std::string out2 = tmp("exp_table2.csv");
    REQUIRE(run("experiment --scenario var1 --d 4 --T 120 --replicates 2 --B 50 "
                "--lambda 0.05 --bt 0.1 --seed 11 --output " + out2) == 0);
    CHECK(slurp(out + ".raw.csv") == slurp(out2 + ".raw.csv"));
    const Matrix raw1 = read_csv_file(out + ".raw.csv");
    const Matrix raw2 = read_csv_file(out2 + ".raw.csv");
    CHECK((raw1 - raw2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(slurp(out) == slurp(out2));
}
