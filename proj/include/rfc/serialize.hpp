#pragma once

// JSON and CSV forms of the library objects. Non-finite numbers are written
// as the strings "inf", "-inf" and "nan".

#include <string>

#include <json.hpp>

#include "rfc/flow.hpp"
#include "rfc/kfun.hpp"
#include "rfc/lyap.hpp"
#include "rfc/reach.hpp"
#include "rfc/signal.hpp"

namespace rfc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json number_to_json(double v);
double number_from_json(const Json& j);

Json to_json(const Vec& v);
Vec vec_from_json(const Json& j);
Json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const MonotoneFn& f);
MonotoneFn monotone_fn_from_json(const Json& j);

Json to_json(const Signal& u);
Signal signal_from_json(const Json& j);

Json to_json(const DisturbanceFamily& fam);
DisturbanceFamily family_from_json(const Json& j);

Json to_json(const SystemModel& model);
SystemModel model_from_json(const Json& j);

Json to_json(const XiForm& xi);
XiForm xi_from_json(const Json& j);

Json to_json(const Envelope& env);

/// Bundle with the tables and everything needed to evaluate W again.
Json to_json(const LyapConstruction& c);
LyapConstruction construction_from_json(const Json& j);

/// Shortest round-trip decimal form.
std::string format_number(double v);
/// Header row is the t grid (first cell "r\\t"), one row per r.
std::string envelope_csv(const Envelope& env);

}  // namespace rfc
