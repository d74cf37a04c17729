#pragma once

// Small helpers shared by every module that round-trips Eigen data through
// JSON.  All failures throw ParseError with the offending key in the text.

#include <Eigen/Core>

#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "contactfit/errors.hpp"

namespace contactfit {

inline void require_keys(const nlohmann::json& j, const std::string& what,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
    if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
    std::set<std::string> allowed;
    for (const char* k : required) {
        if (!j.contains(k)) throw ParseError(what + ": missing key \"" + k + "\"");
        allowed.insert(k);
    }
    for (const char* k : optional) allowed.insert(k);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) throw ParseError(what + ": unknown key \"" + key + "\"");
    }
}

inline double number_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_number()) throw ParseError(what + ": expected a number");
    return j.get<double>();
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ParseError(what + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = number_from_json(j[i], what);
    }
    return v;
}

inline Eigen::Vector3d vec3_from_json(const nlohmann::json& j, const std::string& what) {
    const Eigen::VectorXd v = vector_from_json(j, what);
    if (v.size() != 3) throw ParseError(what + ": expected 3 entries, got " + std::to_string(v.size()));
    return v.head<3>();
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what,
                                        int cols = -1) {
    if (!j.is_array()) throw ParseError(what + ": expected an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::VectorXd row = vector_from_json(j[static_cast<std::size_t>(r)],
                                                     what + " row " + std::to_string(r));
        if (r == 0) {
            if (cols >= 0 && row.size() != cols) {
                throw ParseError(what + ": expected " + std::to_string(cols) +
                                 " columns, got " + std::to_string(row.size()));
            }
            m.resize(rows, row.size());
        } else if (row.size() != m.cols()) {
            throw ParseError(what + ": ragged rows (row " + std::to_string(r) + ")");
        }
        m.row(r) = row;
    }
    if (rows == 0 && cols >= 0) m.resize(0, cols);
    return m;
}

inline Eigen::MatrixX3i int_matrix3_from_json(const nlohmann::json& j, const std::string& what) {
    const Eigen::MatrixXd m = matrix_from_json(j, what, 3);
    Eigen::MatrixX3i out(m.rows(), 3);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            const double v = m(r, c);
            if (v != static_cast<double>(static_cast<int>(v))) {
                throw ParseError(what + ": non-integer entry at row " + std::to_string(r));
            }
            out(r, c) = static_cast<int>(v);
        }
    }
    return out;
}

inline nlohmann::json to_json_array(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline nlohmann::json to_json_array(const Eigen::Vector3d& v) {
    return nlohmann::json::array({v.x(), v.y(), v.z()});
}

template <class Derived>
nlohmann::json to_json_rows(const Eigen::MatrixBase<Derived>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace contactfit
