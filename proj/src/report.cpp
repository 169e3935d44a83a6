#include "gel/report.hpp"

#include <cmath>
#include <limits>

namespace gel {

using nlohmann::json;

json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

double real_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw GelError(ErrorCode::Parse, "bad real value in report: " + s);
  }
  return j.get<double>();
}

namespace {

json label_map_to_json(const std::map<Label, double>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = real_to_json(v);
  return out;
}

std::map<Label, double> label_map_from_json(const json& j) {
  std::map<Label, double> out;
  for (const auto& [k, v] : j.items()) out[k] = real_from_json(v);
  return out;
}

json weights_to_json(const std::vector<SampleWeight>& w) {
  json ids = json::array();
  json values = json::array();
  for (const auto& s : w) {
    ids.push_back(s.id);
    values.push_back(real_to_json(s.weight));
  }
  return json{{"ids", ids}, {"weights", values}};
}

std::vector<SampleWeight> weights_from_json(const json& j) {
  const auto& ids = j.at("ids");
  const auto& values = j.at("weights");
  if (ids.size() != values.size()) throw GelError(ErrorCode::Parse, "weight/id length mismatch");
  std::vector<SampleWeight> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({ids[i].get<SampleId>(), real_from_json(values[i])});
  }
  return out;
}

template <class T, class F>
void put_optional(json& j, const char* key, const std::optional<T>& v, F convert) {
  if (v) j[key] = convert(*v);
}

}  // namespace

json report_to_json(const Report& r) {
  json j;
  j["tool_version"] = r.tool_version;
  j["config"] = r.config;
  j["command"] = r.command;
  j["status"] = r.status;
  j["divergence"] = r.divergence;
  j["two_sample"] = r.two_sample;
  j["divergence_nats"] = real_to_json(r.divergence_nats);
  j["divergence_bits"] = real_to_json(r.divergence_bits);
  put_optional(j, "model_divergence_nats", r.model_divergence_nats, real_to_json);
  put_optional(j, "model_divergence_bits", r.model_divergence_bits, real_to_json);
  j["score"] = r.score;
  j["wilks"] = real_to_json(r.wilks);
  put_optional(j, "hull", r.hull, [](const std::string& s) { return json(s); });
  put_optional(j, "hull_distance", r.hull_distance, real_to_json);
  j["iterations"] = r.iterations;
  j["final_grad_norm"] = real_to_json(r.final_grad_norm);
  put_optional(j, "hessian_rank", r.hessian_rank, [](Index v) { return json(v); });
  put_optional(j, "hotelling_t2", r.hotelling_t2, real_to_json);
  put_optional(j, "data_weights", r.data_weights, weights_to_json);
  put_optional(j, "model_weights", r.model_weights, weights_to_json);
  put_optional(j, "alpha", r.alpha, [](Index v) { return json(v); });
  j["beta"] = r.beta;
  if (r.class_report) {
    const auto& c = *r.class_report;
    json cr{{"class_mass", label_map_to_json(c.class_mass)},
            {"rescaled", label_map_to_json(c.rescaled)}};
    if (c.oracle) cr["oracle"] = label_map_to_json(*c.oracle);
    if (c.hellinger_to_oracle) cr["hellinger_to_oracle"] = real_to_json(*c.hellinger_to_oracle);
    j["class_report"] = cr;
  }
  if (r.pr_curve) {
    json pts = json::array();
    for (const auto& p : r.pr_curve->points) {
      pts.push_back({real_to_json(p.threshold), real_to_json(p.precision), real_to_json(p.recall)});
    }
    j["pr_curve"] = {{"auc", real_to_json(r.pr_curve->auc)}, {"points", pts}};
  }
  if (r.ranking) {
    json rk = json::array();
    for (const auto& s : *r.ranking) rk.push_back({s.id, real_to_json(s.weight)});
    j["ranking"] = rk;
  }
  if (!r.per_class.empty()) j["per_class"] = r.per_class;
  j["warnings"] = r.warnings;
  j["seed"] = r.seed;
  j["timing_seconds"] = r.timing_seconds;
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  try {
    r.tool_version = j.at("tool_version").get<std::string>();
    r.config = j.at("config");
    r.command = j.at("command").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.divergence = j.at("divergence").get<std::string>();
    r.two_sample = j.at("two_sample").get<bool>();
    r.divergence_nats = real_from_json(j.at("divergence_nats"));
    r.divergence_bits = real_from_json(j.at("divergence_bits"));
    if (j.contains("model_divergence_nats")) r.model_divergence_nats = real_from_json(j["model_divergence_nats"]);
    if (j.contains("model_divergence_bits")) r.model_divergence_bits = real_from_json(j["model_divergence_bits"]);
    r.score = j.at("score").get<std::string>();
    r.wilks = real_from_json(j.at("wilks"));
    if (j.contains("hull")) r.hull = j["hull"].get<std::string>();
    if (j.contains("hull_distance")) r.hull_distance = real_from_json(j["hull_distance"]);
    r.iterations = j.at("iterations").get<Index>();
    r.final_grad_norm = real_from_json(j.at("final_grad_norm"));
    if (j.contains("hessian_rank")) r.hessian_rank = j["hessian_rank"].get<Index>();
    if (j.contains("hotelling_t2")) r.hotelling_t2 = real_from_json(j["hotelling_t2"]);
    if (j.contains("data_weights")) r.data_weights = weights_from_json(j["data_weights"]);
    if (j.contains("model_weights")) r.model_weights = weights_from_json(j["model_weights"]);
    if (j.contains("alpha")) r.alpha = j["alpha"].get<Index>();
    r.beta = j.at("beta").get<Index>();
    if (j.contains("class_report")) {
      const auto& cr = j["class_report"];
      ClassReport c;
      c.class_mass = label_map_from_json(cr.at("class_mass"));
      c.rescaled = label_map_from_json(cr.at("rescaled"));
      if (cr.contains("oracle")) c.oracle = label_map_from_json(cr["oracle"]);
      if (cr.contains("hellinger_to_oracle")) c.hellinger_to_oracle = real_from_json(cr["hellinger_to_oracle"]);
      r.class_report = c;
    }
    if (j.contains("pr_curve")) {
      PrCurve c;
      c.auc = real_from_json(j["pr_curve"].at("auc"));
      for (const auto& p : j["pr_curve"].at("points")) {
        c.points.push_back({real_from_json(p[0]), real_from_json(p[1]), real_from_json(p[2])});
      }
      r.pr_curve = c;
    }
    if (j.contains("ranking")) {
      std::vector<RankedSample> rk;
      for (const auto& s : j["ranking"]) rk.push_back({s[0].get<SampleId>(), real_from_json(s[1])});
      r.ranking = rk;
    }
    if (j.contains("per_class")) r.per_class = j["per_class"];
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.timing_seconds = j.at("timing_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw GelError(ErrorCode::Parse, std::string("report JSON: ") + e.what());
  }
  return r;
}

std::string serialize_report(const Report& report) { return report_to_json(report).dump(2) + "\n"; }

}  // namespace gel
