#pragma once
// Case files (one JSON object per line) and fingerprint documents.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "postval/core.hpp"

namespace postval {

using Json = nlohmann::json;

namespace detail {

/// Raised while decoding one case; the loader prefixes the case id.
struct FieldError {
  std::string field;
  std::string message;
};

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw FieldError{path + key, "missing required key"};
  return obj.at(key);
}

inline double as_number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw FieldError{field, "expected a number"};
  return j.get<double>();
}

inline Vector as_vector(const Json& j, const std::string& field) {
  if (!j.is_array()) throw FieldError{field, "expected an array of numbers"};
  Vector out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<Vector> as_matrix(const Json& j, const std::string& field) {
  if (!j.is_array()) throw FieldError{field, "expected an array of arrays"};
  std::vector<Vector> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_vector(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline PosteriorSamples as_samples(const Json& j, const std::string& field,
                                   std::optional<Vector> weights = std::nullopt) {
  std::vector<Vector> pts = as_matrix(j, field);
  try {
    return PosteriorSamples(pts, std::move(weights));
  } catch (const ValidationError& e) {
    throw FieldError{field, e.what()};
  }
}

inline Mode as_mode(const Json& j, const std::string& field) {
  if (!j.is_object()) throw FieldError{field, "expected an object"};
  Mode m;
  m.center = as_vector(require(j, "center", field + "."), field + ".center");
  if (j.contains("covariance")) {
    std::vector<Vector> rows = as_matrix(j.at("covariance"), field + ".covariance");
    Vector flat;
    for (const Vector& r : rows) {
      if (r.size() != rows.size()) throw FieldError{field + ".covariance", "covariance must be square"};
      flat.insert(flat.end(), r.begin(), r.end());
    }
    m.covariance = std::move(flat);
  }
  if (j.contains("label")) {
    if (!j.at("label").is_string()) throw FieldError{field + ".label", "expected a string"};
    m.label = j.at("label").get<std::string>();
  }
  if (j.contains("relative_mass")) m.relative_mass = as_number(j.at("relative_mass"), field + ".relative_mass");
  if (j.contains("confidence")) m.confidence = as_number(j.at("confidence"), field + ".confidence");
  try {
    normalize_mode(m);
  } catch (const ValidationError& e) {
    throw FieldError{field, e.what()};
  }
  return m;
}

inline Json mode_to_json(const Mode& m) {
  Json j;
  j["center"] = m.center;
  if (m.covariance) {
    const std::size_t d = m.dim();
    Json rows = Json::array();
    for (std::size_t r = 0; r < d; ++r)
      rows.push_back(Vector(m.covariance->begin() + static_cast<std::ptrdiff_t>(r * d),
                            m.covariance->begin() + static_cast<std::ptrdiff_t>((r + 1) * d)));
    j["covariance"] = rows;
  }
  if (m.label) j["label"] = *m.label;
  j["relative_mass"] = m.relative_mass;
  if (m.confidence) j["confidence"] = *m.confidence;
  return j;
}

inline Json samples_to_json(const PosteriorSamples& s) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < s.size(); ++i) rows.push_back(Vector(s.point(i).begin(), s.point(i).end()));
  return rows;
}

}  // namespace detail

/// Decodes one case object. Throws ParseError naming the case id and field on
/// schema violations and ValidationError on invariant breaches.
inline ValidationCase case_from_json(const Json& j) {
  using detail::FieldError;
  std::string id = "<unknown>";
  try {
    if (!j.is_object()) throw FieldError{"", "case record must be an object"};
    const Json& jid = detail::require(j, "id", "");
    if (!jid.is_string()) throw FieldError{"id", "expected a string"};
    id = jid.get<std::string>();

    const Json& pred = detail::require(j, "prediction", "");
    std::optional<Vector> weights;
    if (pred.contains("weights")) weights = detail::as_vector(pred.at("weights"), "prediction.weights");
    ValidationCase c;
    c.id = id;
    c.prediction = detail::as_samples(detail::require(pred, "samples", "prediction."),
                                      "prediction.samples", std::move(weights));
    if (pred.contains("log_density"))
      c.prediction_log_density = detail::as_vector(pred.at("log_density"), "prediction.log_density");

    const Json& ref = detail::require(j, "reference", "");
    const Json& gran = detail::require(ref, "granularity", "reference.");
    auto g = gran.is_string() ? parse_granularity(gran.get<std::string>()) : std::nullopt;
    if (!g) throw FieldError{"reference.granularity", "unknown granularity"};
    c.reference.granularity = *g;
    const Json& modes = detail::require(ref, "modes", "reference.");
    if (!modes.is_array()) throw FieldError{"reference.modes", "expected an array"};
    for (std::size_t i = 0; i < modes.size(); ++i)
      c.reference.modes.push_back(detail::as_mode(modes[i], "reference.modes[" + std::to_string(i) + "]"));
    if (ref.contains("samples")) c.reference.samples = detail::as_samples(ref.at("samples"), "reference.samples");
    if (ref.contains("sample_labels")) {
      const Json& sl = ref.at("sample_labels");
      if (!sl.is_array()) throw FieldError{"reference.sample_labels", "expected an array of integers"};
      std::vector<int> labels;
      for (const Json& l : sl) {
        if (!l.is_number_integer()) throw FieldError{"reference.sample_labels", "expected integers"};
        labels.push_back(l.get<int>());
      }
      c.reference.sample_labels = std::move(labels);
    }
    // Reference modes without an explicit mass share it uniformly.
    bool any_mass = false;
    for (std::size_t i = 0; i < modes.size(); ++i) any_mass |= modes[i].contains("relative_mass");
    if (!any_mass)
      for (Mode& m : c.reference.modes) m.relative_mass = 1.0 / static_cast<double>(c.reference.modes.size());

    if (j.contains("observation")) {
      const Json& obs = j.at("observation");
      Observation o;
      o.y = detail::as_vector(detail::require(obs, "y", "observation."), "observation.y");
      if (obs.contains("params")) {
        if (!obs.at("params").is_object()) throw FieldError{"observation.params", "expected an object"};
        for (const auto& [k, v] : obs.at("params").items())
          o.params[k] = detail::as_number(v, "observation.params." + k);
      }
      c.observation = std::move(o);
    }
    if (j.contains("dims")) {
      const Json& dims = j.at("dims");
      if (dims.contains("periodic")) {
        const Json& per = dims.at("periodic");
        if (!per.is_array()) throw FieldError{"dims.periodic", "expected an array"};
        for (std::size_t i = 0; i < per.size(); ++i) {
          std::string f = "dims.periodic[" + std::to_string(i) + "]";
          const Json& idx = detail::require(per[i], "index", f + ".");
          if (!idx.is_number_integer() || idx.get<long long>() < 0)
            throw FieldError{f + ".index", "expected a non-negative integer"};
          c.periodic.push_back({idx.get<std::size_t>(),
                                detail::as_number(detail::require(per[i], "period", f + "."), f + ".period")});
        }
      }
    }
    try {
      validate_case(c);
    } catch (const ValidationError& e) {
      throw ValidationError("case '" + id + "': " + e.what());
    }
    attach_reference_support(c.reference);
    return c;
  } catch (const FieldError& e) {
    throw ParseError("case '" + id + "', field '" + e.field + "': " + e.message);
  }
}

inline Json case_to_json(const ValidationCase& c) {
  Json j;
  j["id"] = c.id;
  j["prediction"]["samples"] = detail::samples_to_json(c.prediction);
  if (c.prediction.weights()) j["prediction"]["weights"] = *c.prediction.weights();
  if (c.prediction_log_density) j["prediction"]["log_density"] = *c.prediction_log_density;
  j["reference"]["granularity"] = std::string(to_string(c.reference.granularity));
  j["reference"]["modes"] = Json::array();
  for (const Mode& m : c.reference.modes) j["reference"]["modes"].push_back(detail::mode_to_json(m));
  if (c.reference.samples) j["reference"]["samples"] = detail::samples_to_json(*c.reference.samples);
  if (c.reference.sample_labels) j["reference"]["sample_labels"] = *c.reference.sample_labels;
  if (c.observation) {
    j["observation"]["y"] = c.observation->y;
    j["observation"]["params"] = Json::object();
    for (const auto& [k, v] : c.observation->params) j["observation"]["params"][k] = v;
  }
  if (!c.periodic.empty()) {
    Json per = Json::array();
    for (const PeriodicDim& p : c.periodic) per.push_back({{"index", p.index}, {"period", p.period}});
    j["dims"]["periodic"] = per;
  }
  return j;
}

/// Parses line-delimited case records; blank lines are skipped.
inline std::vector<ValidationCase> parse_dataset(std::istream& in) {
  std::vector<ValidationCase> cases;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": malformed record: " + e.what());
    }
    ValidationCase c = case_from_json(j);
    if (!seen.insert(c.id).second) throw ValidationError("duplicate case id '" + c.id + "'");
    cases.push_back(std::move(c));
  }
  return cases;
}

inline std::vector<ValidationCase> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  return parse_dataset(in);
}

inline void write_dataset(std::ostream& out, const std::vector<ValidationCase>& cases) {
  for (const ValidationCase& c : cases) out << case_to_json(c).dump() << '\n';
}

inline void save_dataset(const std::string& path, const std::vector<ValidationCase>& cases) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write case file '" + path + "'");
  write_dataset(out, cases);
}

// ---------------------------------------------------------------------------
// Fingerprint documents

inline Json fingerprint_to_json(const Fingerprint& f) {
  auto avail = [](bool b) { return b ? "available" : "unavailable"; };
  auto yes = [](bool b) { return b ? "yes" : "no"; };
  return Json{{"p1_reference_granularity", std::string(to_string(f.reference_granularity))},
              {"p2_resimulation", avail(f.resimulation)},
              {"p3_confidence_score", avail(f.confidence_score)},
              {"p4_prediction_density", avail(f.prediction_density)},
              {"p5_natural_discretization", avail(f.natural_discretization)},
              {"p6_univariate", yes(f.univariate)},
              {"p7_accurate_uncertainty", yes(f.accurate_uncertainty)}};
}

/// Throws ParseError naming the offending field.
inline Fingerprint fingerprint_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("fingerprint must be an object");
  auto text = [&](const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("fingerprint field '") + key + "': missing");
    if (!j.at(key).is_string()) throw ParseError(std::string("fingerprint field '") + key + "': expected a string");
    return j.at(key).get<std::string>();
  };
  auto choice = [&](const char* key, const char* yes, const char* no) {
    std::string v = text(key);
    if (v == yes) return true;
    if (v == no) return false;
    throw ParseError(std::string("fingerprint field '") + key + "': invalid value '" + v +
                     "' (expected '" + yes + "' or '" + no + "')");
  };
  Fingerprint f;
  std::string g = text("p1_reference_granularity");
  auto gran = parse_granularity(g);
  if (!gran) throw ParseError("fingerprint field 'p1_reference_granularity': invalid value '" + g + "'");
  f.reference_granularity = *gran;
  f.resimulation = choice("p2_resimulation", "available", "unavailable");
  f.confidence_score = choice("p3_confidence_score", "available", "unavailable");
  f.prediction_density = choice("p4_prediction_density", "available", "unavailable");
  f.natural_discretization = choice("p5_natural_discretization", "available", "unavailable");
  f.univariate = choice("p6_univariate", "yes", "no");
  f.accurate_uncertainty = choice("p7_accurate_uncertainty", "yes", "no");
  return f;
}

// ---------------------------------------------------------------------------

struct Diagnostic {
  std::string property;  // fingerprint item, e.g. "P4"
  std::string message;
  bool operator==(const Diagnostic&) const = default;
};

/// Lists every fingerprint claim the case cannot support. Never throws.
inline std::vector<Diagnostic> check_case_consistency(const ValidationCase& c, const Fingerprint& fp,
                                                      bool density_callback_registered = false) {
  std::vector<Diagnostic> out;
  if (fp.reference_granularity != c.reference.granularity) {
    out.push_back({"P1", "fingerprint claims " + std::string(to_string(fp.reference_granularity)) +
                             " but reference is " + std::string(to_string(c.reference.granularity))});
  }
  if (fp.resimulation && !c.observation) {
    out.push_back({"P2", "resimulation claimed but the case has no observation"});
  }
  if (fp.prediction_density && !c.prediction_log_density && !density_callback_registered) {
    out.push_back({"P4", "prediction density claimed but no log-densities are present"});
  }
  if (fp.univariate && c.dim() != 1) {
    out.push_back({"P6", "univariate claimed but d=" + std::to_string(c.dim())});
  }
  return out;
}

}  // namespace postval
