#pragma once
// Metric reports: in-memory form, JSON document and CSV curve tables.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "postval/core.hpp"
#include "postval/detection_metrics.hpp"

namespace postval {

struct CaseDiagnostic {
  std::string case_id;  // empty for dataset-level messages
  std::string message;
  bool operator==(const CaseDiagnostic&) const = default;
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  bool operator==(const Provenance&) const = default;
};

struct MetricReport {
  std::map<std::string, Scalar> scalars;
  std::map<std::string, std::vector<CurvePoint>> curves;
  std::vector<CalibrationBin> calibration;
  std::vector<CaseDiagnostic> diagnostics;
  Provenance provenance;

  const Scalar& at(const std::string& name) const {
    auto it = scalars.find(name);
    if (it == scalars.end()) throw InvalidArgument("report has no scalar '" + name + "'");
    return it->second;
  }
  bool operator==(const MetricReport&) const = default;
};

#ifdef POSTVAL_VERSION
inline constexpr const char* kToolVersion = POSTVAL_VERSION;
#else
inline constexpr const char* kToolVersion = "0.0.0";
#endif

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::json(nullptr);
}
inline std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace detail

inline nlohmann::json report_to_json(const MetricReport& r) {
  using nlohmann::json;
  json j;
  j["scalars"] = json::object();
  for (const auto& [name, s] : r.scalars)
    j["scalars"][name] = json{{"value", detail::number_or_null(s.value)}, {"flags", s.flags}};
  j["curves"] = json::object();
  for (const auto& [name, points] : r.curves) {
    json arr = json::array();
    for (const CurvePoint& p : points)
      arr.push_back(json{{"threshold", p.threshold},
                         {"recall", p.recall},
                         {"precision", detail::optional_number(p.precision)},
                         {"fppi", detail::optional_number(p.fppi)}});
    j["curves"][name] = arr;
  }
  json cal = json::array();
  for (const CalibrationBin& b : r.calibration)
    cal.push_back(json{{"lower", b.lower},
                       {"upper", b.upper},
                       {"count", b.count},
                       {"mean_confidence", detail::optional_number(b.mean_confidence)},
                       {"precision", detail::optional_number(b.precision)}});
  j["calibration"] = cal;
  json diags = json::array();
  for (const CaseDiagnostic& d : r.diagnostics) diags.push_back(json{{"case", d.case_id}, {"message", d.message}});
  j["diagnostics"] = diags;
  j["provenance"] = json{{"config_hash", r.provenance.config_hash},
                         {"seed", r.provenance.seed},
                         {"tool_version", r.provenance.tool_version}};
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    for (const auto& [name, s] : j.at("scalars").items()) {
      Scalar sc;
      if (!s.at("value").is_null()) sc.value = s.at("value").get<double>();
      for (const auto& f : s.at("flags")) sc.flags.insert(f.get<std::string>());
      r.scalars[name] = sc;
    }
    for (const auto& [name, arr] : j.at("curves").items()) {
      auto& points = r.curves[name];
      for (const auto& p : arr)
        points.push_back(CurvePoint{p.at("threshold").get<double>(), p.at("recall").get<double>(),
                                    detail::read_optional(p, "precision"), detail::read_optional(p, "fppi")});
    }
    for (const auto& b : j.at("calibration"))
      r.calibration.push_back(CalibrationBin{b.at("lower").get<double>(), b.at("upper").get<double>(),
                                             b.at("count").get<std::size_t>(),
                                             detail::read_optional(b, "mean_confidence"),
                                             detail::read_optional(b, "precision")});
    for (const auto& d : j.at("diagnostics"))
      r.diagnostics.push_back({d.at("case").get<std::string>(), d.at("message").get<std::string>()});
    const auto& p = j.at("provenance");
    r.provenance = {p.at("config_hash").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                    p.at("tool_version").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline std::string report_to_string(const MetricReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "threshold,recall,precision,fppi\n";
  for (const CurvePoint& p : points)
    out << num(p.threshold) << ',' << num(p.recall) << ',' << (p.precision ? num(*p.precision) : "") << ','
        << (p.fppi ? num(*p.fppi) : "") << '\n';
}

inline void write_calibration_csv(std::ostream& out, const std::vector<CalibrationBin>& bins) {
  out << "lower,upper,count,mean_confidence,precision\n";
  for (const CalibrationBin& b : bins) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,", b.lower, b.upper, b.count);
    out << buf;
    if (b.mean_confidence) {
      std::snprintf(buf, sizeof buf, "%.17g", *b.mean_confidence);
      out << buf;
    }
    out << ',';
    if (b.precision) {
      std::snprintf(buf, sizeof buf, "%.17g", *b.precision);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace postval
