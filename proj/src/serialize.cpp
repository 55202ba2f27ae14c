#include "rfc/serialize.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "rfc/errors.hpp"

namespace rfc {

Json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const Json& j) {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
        throw ContractError("expected a number, got \"" + s + "\"");
    }
    if (!j.is_number()) throw ContractError("expected a number, got " + j.dump());
    return j.get<double>();
}

namespace {

Json numbers(std::span<const double> xs) {
    Json a = Json::array();
    for (double x : xs) a.push_back(number_to_json(x));
    return a;
}

std::vector<double> numbers_from(const Json& j) {
    if (!j.is_array()) throw ContractError("expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(number_from_json(e));
    return out;
}

}  // namespace

Json to_json(const Vec& v) { return numbers({v.data(), static_cast<std::size_t>(v.size())}); }

Vec vec_from_json(const Json& j) {
    if (j.is_number()) return Vec::Constant(1, j.get<double>());
    const auto xs = numbers_from(j);
    return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Json to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(number_to_json(m(i, k)));
        rows.push_back(std::move(r));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty()) throw ContractError("expected a non-empty array of rows");
    const std::size_t cols = j.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto row = numbers_from(j[i]);
        if (row.size() != cols) throw ContractError("matrix rows differ in length");
        for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    return m;
}

Json to_json(const MonotoneFn& f) {
    return {{"knots", numbers(f.knots())},
            {"values", numbers(f.values())},
            {"tail_slope", number_to_json(f.tail_slope())},
            {"s_max", number_to_json(f.s_max())}};
}

MonotoneFn monotone_fn_from_json(const Json& j) {
    return MonotoneFn(numbers_from(j.at("knots")), numbers_from(j.at("values")),
                      number_from_json(j.at("tail_slope")), j.contains("s_max") ? number_from_json(j["s_max"]) : 0.0);
}

Json to_json(const Signal& u) {
    Json vals = Json::array();
    for (const Vec& v : u.values()) vals.push_back(to_json(v));
    return {{"switch_times", numbers(u.switch_times())}, {"values", vals}, {"tail", to_json(u.tail())}};
}

Signal signal_from_json(const Json& j) {
    if (j.is_number() || (j.is_array() && (j.empty() || !j.front().is_array())))
        return Signal::constant(vec_from_json(j));
    std::vector<Vec> vals;
    for (const auto& v : j.value("values", Json::array())) vals.push_back(vec_from_json(v));
    return Signal(numbers_from(j.value("switch_times", Json::array())), std::move(vals), vec_from_json(j.at("tail")));
}

Json to_json(const DisturbanceFamily& fam) {
    Json lattice = Json::array(), members = Json::array();
    for (const Vec& v : fam.lattice()) lattice.push_back(to_json(v));
    for (const Signal& u : fam.members()) members.push_back(to_json(u));
    return {{"R", number_to_json(fam.R())},
            {"delta", fam.delta()},
            {"horizon", fam.horizon()},
            {"seed", fam.seed()},
            {"lattice", lattice},
            {"members", members}};
}

DisturbanceFamily family_from_json(const Json& j) {
    std::vector<Vec> lattice;
    for (const auto& v : j.at("lattice")) lattice.push_back(vec_from_json(v));
    std::vector<Signal> members;
    for (const auto& u : j.at("members")) members.push_back(signal_from_json(u));
    return DisturbanceFamily(number_from_json(j.at("R")), j.at("delta").get<double>(), std::move(lattice),
                             std::move(members), j.value("horizon", 0.0), j.value("seed", std::uint64_t{0}));
}

Json to_json(const SystemModel& model) {
    Json j = {{"field_id", model.name()}, {"params", Json::object()}, {"n", model.n}, {"m", model.m}};
    if (model.field == FieldId::Linear) j["params"] = {{"A", to_json(model.A)}, {"B", to_json(model.B)}};
    if (model.lip_bound) j["lip_bound"] = to_json(*model.lip_bound);
    return j;
}

SystemModel model_from_json(const Json& j) {
    SystemModel m;
    switch (field_id_from_string(j.at("field_id").get<std::string>())) {
        case FieldId::ScalarXu: m = SystemModel::scalar_xu(); break;
        case FieldId::ScalarRfc: m = SystemModel::scalar_rfc(); break;
        case FieldId::Quadratic: m = SystemModel::quadratic(); break;
        case FieldId::DecayPlusInput: m = SystemModel::decay_plus_input(); break;
        case FieldId::Linear: {
            const auto& p = j.at("params");
            m = SystemModel::linear(matrix_from_json(p.at("A")), matrix_from_json(p.at("B")));
            break;
        }
    }
    if (j.contains("n") && j["n"].get<std::size_t>() != m.n) throw ContractError("model: n does not match the field");
    if (j.contains("m") && j["m"].get<std::size_t>() != m.m) throw ContractError("model: m does not match the field");
    if (j.contains("lip_bound") && j["lip_bound"].is_object()) m.lip_bound = monotone_fn_from_json(j["lip_bound"]);
    return m;
}

Json to_json(const XiForm& xi) {
    Json j = {{"xi", to_json(xi.xi)},
              {"c", xi.c},
              {"zeta0", xi.zeta0},
              {"r_valid", number_to_json(xi.r_valid)},
              {"t_valid", number_to_json(xi.t_valid)}};
    if (xi.zeta) j["zeta"] = to_json(*xi.zeta);
    return j;
}

XiForm xi_from_json(const Json& j) {
    XiForm xi{monotone_fn_from_json(j.at("xi")), number_from_json(j.at("c")), 0.0, std::nullopt, INFINITY, INFINITY};
    if (j.contains("zeta0")) xi.zeta0 = number_from_json(j["zeta0"]);
    if (j.contains("zeta")) xi.zeta = monotone_fn_from_json(j["zeta"]);
    if (j.contains("r_valid")) xi.r_valid = number_from_json(j["r_valid"]);
    if (j.contains("t_valid")) xi.t_valid = number_from_json(j["t_valid"]);
    return xi;
}

Json to_json(const Envelope& env) {
    return {{"r_grid", numbers(env.r_grid)},
            {"t_grid", numbers(env.t_grid)},
            {"values", to_json(env.values)},
            {"n_sphere", env.n_sphere},
            {"family_ref",
             {{"R", number_to_json(env.family_ref.R)},
              {"delta", env.family_ref.delta},
              {"size", env.family_ref.size},
              {"seed", env.family_ref.seed}}},
            {"refined_signals", env.refined_signals}};
}

Json to_json(const LyapConstruction& c) {
    return {{"schema_version", kSchemaVersion},
            {"rho", to_json(c.rho)},
            {"xi", to_json(c.xi_form.xi)},
            {"c", c.xi_form.c},
            {"xi_form", to_json(c.xi_form)},
            {"K", c.K},
            {"R_max", c.R_max},
            {"T_table", to_json(c.T_table)},
            {"M_table", to_json(c.M_table)},
            {"family_ref",
             {{"R", number_to_json(c.family.R())},
              {"delta", c.family.delta()},
              {"size", c.family.size()},
              {"seed", c.family.seed()}}},
            {"family", to_json(c.family)},
            {"C_upper", c.C_upper},
            {"C2", c.C2},
            {"t_points", c.t_points},
            {"t_step", c.t_step},
            {"tol", c.tol},
            {"R_work", c.R_work},
            {"xi_range_ok", c.xi_range_ok}};
}

LyapConstruction construction_from_json(const Json& j) {
    LyapConstruction c{monotone_fn_from_json(j.at("rho")), xi_from_json(j.at("xi_form")),
                       family_from_json(j.at("family")), j.at("K").get<int>(), j.at("R_max").get<std::size_t>(),
                       matrix_from_json(j.at("T_table")), matrix_from_json(j.at("M_table"))};
    c.t_points = j.at("t_points").get<std::size_t>();
    c.t_step = j.at("t_step").get<double>();
    c.tol = j.at("tol").get<double>();
    c.R_work = j.at("R_work").get<double>();
    c.C_upper = j.at("C_upper").get<double>();
    c.C2 = j.at("C2").get<double>();
    c.xi_range_ok = j.at("xi_range_ok").get<bool>();
    const auto rows = static_cast<Eigen::Index>(c.R_max + 1);
    if (c.T_table.rows() != rows || c.T_table.cols() != c.K || c.M_table.rows() != rows || c.M_table.cols() != c.K)
        throw ContractError("construction bundle: table shape does not match K and R_max");
    return c;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string envelope_csv(const Envelope& env) {
    std::string out = "r\\t";
    for (double t : env.t_grid) out += "," + format_number(t);
    out += "\n";
    for (std::size_t i = 0; i < env.r_grid.size(); ++i) {
        out += format_number(env.r_grid[i]);
        for (std::size_t k = 0; k < env.t_grid.size(); ++k)
            out += "," + format_number(env.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        out += "\n";
    }
    return out;
}

}  // namespace rfc
