#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "varinfer/bootstrap.hpp"
#include "varinfer/estimation.hpp"
#include "varinfer/innovations.hpp"
#include "varinfer/tuning.hpp"

namespace varinfer {

using Json = nlohmann::ordered_json;

inline constexpr const char* library_version = "0.1.0";

// ---------------------------------------------------------------------------
// CSV: comma-separated, header row, decimal point, locale-independent.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const Matrix& data,
                      const std::vector<std::string>& header = {}) {
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j > 0) os << ',';
            os << header[j];
        }
        os << '\n';
    }
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (j > 0) os << ',';
            os << format_double(data(i, j));
        }
        os << '\n';
    }
}

inline void write_csv_file(const std::string& path, const Matrix& data,
                           const std::vector<std::string>& header = {}) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_csv(os, data, header);
    if (!os) throw std::runtime_error("write failed: " + path);
}

/// Reads a numeric CSV with an optional header row (detected by a non-numeric
/// first field).
inline Matrix read_csv_file(const std::string& path,
                            std::vector<std::string>* header = nullptr) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first_line = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> row;
        bool numeric = true;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(field, &pos));
                if (pos != field.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (first_line && !numeric) {
            if (header != nullptr) *header = fields;
            first_line = false;
            continue;
        }
        first_line = false;
        if (!numeric) throw std::runtime_error("non-numeric CSV row in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty CSV: " + path);
    Matrix out(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) {
            throw std::runtime_error("ragged CSV: " + path);
        }
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j) {
    const auto n_rows = j.size();
    if (n_rows == 0) return Matrix(0, 0);
    const auto n_cols = j.at(0).size();
    Matrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t c = 0; c < n_cols; ++c) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                j.at(i).at(c).get<double>();
        }
    }
    return m;
}

inline Json model_to_json(const VarModel& model) {
    Json j;
    j["p"] = model.order();
    j["d"] = model.dim();
    Json coeffs = Json::array();
    for (const Matrix& A : model.coefficients) coeffs.push_back(matrix_to_json(A));
    j["coefficients"] = std::move(coeffs);
    return j;
}

inline VarModel model_from_json(const Json& j) {
    VarModel model;
    for (const auto& A : j.at("coefficients")) {
        model.coefficients.push_back(matrix_from_json(A));
    }
    model.check_shapes();
    return model;
}

inline Json fit_to_json(const PostSelectionFit& fit) {
    Json j;
    j["p"] = fit.p;
    j["d"] = fit.d;
    j["T"] = fit.T;
    j["lambda"] = fit.lambda;
    j["b_T"] = fit.b_T;
    Json supports = Json::array();
    for (const IndexSet& s : fit.supports) supports.push_back(s.indices());
    j["supports"] = std::move(supports);  // 0-based row indices into S
    j["lasso_S"] = matrix_to_json(fit.lasso_S);
    j["refit_S"] = matrix_to_json(fit.refit_S);
    j["lasso_converged"] = fit.converged;
    j["degenerate_columns"] = fit.degenerate;
    return j;
}

inline PostSelectionFit fit_from_json(const Json& j) {
    PostSelectionFit fit;
    fit.p = j.at("p").get<int>();
    fit.d = j.at("d").get<int>();
    fit.T = j.at("T").get<int>();
    fit.lambda = j.at("lambda").get<double>();
    fit.b_T = j.at("b_T").get<double>();
    for (const auto& s : j.at("supports")) {
        fit.supports.emplace_back(s.get<std::vector<int>>());
    }
    fit.lasso_S = matrix_from_json(j.at("lasso_S"));
    fit.refit_S = matrix_from_json(j.at("refit_S"));
    if (j.contains("lasso_converged")) {
        fit.converged = j.at("lasso_converged").get<std::vector<bool>>();
    }
    if (j.contains("degenerate_columns")) {
        fit.degenerate = j.at("degenerate_columns").get<std::vector<bool>>();
    }
    return fit;
}

inline Json kernel_to_json(const KernelSpec& kernel) {
    Json j;
    j["kind"] = kernel.kind_name();
    j["bandwidth"] = kernel.bandwidth;
    if (kernel.kind == KernelSpec::Kind::user_tabulated) {
        j["abscissae"] = kernel.abscissae;
        j["values"] = kernel.values;
    }
    return j;
}

inline Json tuning_to_json(const TuningReport& report) {
    Json j;
    j["p"] = report.p;
    j["lambda"] = report.lambda;
    j["b_T"] = report.b_T;
    j["k_T"] = report.k_T;
    j["T1"] = report.T1;
    Json grid = Json::array();
    for (const GridPoint& g : report.grid) {
        grid.push_back({{"lambda", g.lambda}, {"b_T", g.b_T}, {"tau", g.tau}});
    }
    j["grid"] = std::move(grid);
    j["entry_bandwidths"] = report.entry_bandwidths;
    return j;
}

inline Json draws_to_json(const BootstrapDraws& draws, bool include_psi = true) {
    Json j;
    j["B"] = draws.B;
    j["alpha"] = draws.alpha;
    j["c_star"] = draws.c_star;
    j["seed"] = draws.seed;
    j["rng"] = draws.rng_algorithm;
    j["rejected"] = draws.rejected;
    if (include_psi) j["psi"] = draws.psi;
    return j;
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline Json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    Json j;
    is >> j;
    return j;
}

}  // namespace varinfer
