#pragma once
// Shared data model: posterior samples, modes, references, validation cases
// and the problem fingerprint.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace postval {

using Vector = std::vector<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not conform to a file schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on an operation argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline constexpr double kWeightSumTolerance = 1e-9;
inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kEigenvalueTolerance = 1e-9;

// ---------------------------------------------------------------------------
// PosteriorSamples

/// Sample representation of a posterior: n points of dimension d, stored
/// row-major, with optional normalized weights.
class PosteriorSamples {
 public:
  PosteriorSamples() = default;

  PosteriorSamples(std::size_t dim, Vector flat, std::optional<Vector> weights = std::nullopt)
      : dim_(dim), data_(std::move(flat)), weights_(std::move(weights)) {
    check();
  }

  explicit PosteriorSamples(const std::vector<Vector>& points,
                            std::optional<Vector> weights = std::nullopt)
      : weights_(std::move(weights)) {
    if (points.empty()) throw ValidationError("posterior needs at least one sample");
    dim_ = points.front().size();
    data_.reserve(points.size() * dim_);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != dim_) {
        throw ValidationError("sample " + std::to_string(i) + " has dimension " +
                              std::to_string(points[i].size()) + ", expected " +
                              std::to_string(dim_));
      }
      data_.insert(data_.end(), points[i].begin(), points[i].end());
    }
    check();
  }

  /// Univariate convenience constructor.
  static PosteriorSamples univariate(Vector values) { return PosteriorSamples(1, std::move(values)); }

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> point(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double at(std::size_t i, std::size_t axis) const { return data_[i * dim_ + axis]; }
  const Vector& flat() const { return data_; }

  bool weighted() const { return weights_.has_value(); }
  const std::optional<Vector>& weights() const { return weights_; }
  double weight(std::size_t i) const {
    return weights_ ? (*weights_)[i] : 1.0 / static_cast<double>(size());
  }

  /// Values of one coordinate across all samples.
  Vector coordinate(std::size_t axis) const {
    Vector out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, axis);
    return out;
  }

  std::vector<Vector> points() const {
    std::vector<Vector> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.emplace_back(point(i).begin(), point(i).end());
    return out;
  }

  /// Samples at the given indices (duplicates kept); weights renormalized.
  PosteriorSamples subset(std::span<const std::size_t> indices) const {
    Vector flat;
    flat.reserve(indices.size() * dim_);
    std::optional<Vector> w;
    if (weights_) w.emplace();
    double total = 0.0;
    for (std::size_t idx : indices) {
      auto p = point(idx);
      flat.insert(flat.end(), p.begin(), p.end());
      if (w) {
        w->push_back((*weights_)[idx]);
        total += (*weights_)[idx];
      }
    }
    if (w)
      for (double& x : *w) x /= total;
    return PosteriorSamples(dim_, std::move(flat), std::move(w));
  }

  bool operator==(const PosteriorSamples&) const = default;

 private:
  void check() const {
    if (dim_ < 1) throw ValidationError("posterior dimension must be at least 1");
    if (data_.empty()) throw ValidationError("posterior needs at least one sample");
    if (data_.size() % dim_ != 0) throw ValidationError("sample buffer is not a multiple of the dimension");
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw ValidationError("sample " + std::to_string(i / dim_) + " has a non-finite coordinate");
      }
    }
    if (weights_) {
      if (weights_->size() != size()) {
        throw ValidationError("weights length " + std::to_string(weights_->size()) +
                              " does not match sample count " + std::to_string(size()));
      }
      double total = 0.0;
      for (double w : *weights_) {
        if (!(w > 0.0)) throw ValidationError("sample weights must be positive");
        total += w;
      }
      if (std::abs(total - 1.0) > kWeightSumTolerance) {
        throw ValidationError("sample weights must sum to 1");
      }
    }
  }

  std::size_t dim_ = 0;
  Vector data_;
  std::optional<Vector> weights_;
};

// ---------------------------------------------------------------------------
// Mode

struct Mode {
  Vector center;
  std::optional<Vector> covariance;  // row-major d x d
  double relative_mass = 0.0;
  std::optional<double> confidence;
  std::optional<std::string> label;
  /// Samples attributed to this mode, when known (detected modes, labeled
  /// reference posteriors). Not part of the serialized form.
  std::shared_ptr<const PosteriorSamples> support;

  std::size_t dim() const { return center.size(); }

  Eigen::MatrixXd covariance_matrix() const {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) m(r, c) = (*covariance)[static_cast<std::size_t>(r * d + c)];
    return m;
  }

  std::string name(std::size_t index) const {
    return label ? *label : "mode #" + std::to_string(index);
  }

  bool operator==(const Mode& o) const {
    return center == o.center && covariance == o.covariance && relative_mass == o.relative_mass &&
           confidence == o.confidence && label == o.label;
  }
};

/// Checks mode invariants. Eigenvalues in [-1e-9, 0) are clamped to zero by
/// rebuilding the covariance; anything more negative is rejected.
inline void normalize_mode(Mode& m) {
  if (m.center.empty()) throw ValidationError("mode center must not be empty");
  for (double c : m.center)
    if (!std::isfinite(c)) throw ValidationError("mode center has a non-finite coordinate");
  if (!(m.relative_mass >= 0.0 && m.relative_mass <= 1.0))
    throw ValidationError("relative_mass must lie in [0,1]");
  if (m.confidence && !(*m.confidence >= 0.0 && *m.confidence <= 1.0))
    throw ValidationError("confidence must lie in [0,1]");
  if (!m.covariance) return;
  const std::size_t d = m.dim();
  if (m.covariance->size() != d * d)
    throw ValidationError("covariance must be " + std::to_string(d) + "x" + std::to_string(d));
  for (double c : *m.covariance)
    if (!std::isfinite(c)) throw ValidationError("covariance has a non-finite entry");
  Eigen::MatrixXd cov = m.covariance_matrix();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance)
    throw ValidationError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (ev.minCoeff() < -kEigenvalueTolerance)
    throw ValidationError("covariance is not positive semidefinite");
  if (ev.minCoeff() < 0.0) {
    Eigen::MatrixXd fixed =
        eig.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        (*m.covariance)[r * d + c] = fixed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
}

/// Detected or reference modes. `cluster_of[i]` is the source cluster label of
/// mode i when the set came from clustering, empty otherwise.
struct ModeSet {
  std::vector<Mode> modes;
  std::vector<int> cluster_of;
  std::vector<std::string> diagnostics;

  std::size_t size() const { return modes.size(); }
  bool empty() const { return modes.empty(); }
  const Mode& operator[](std::size_t i) const { return modes[i]; }
  Mode& operator[](std::size_t i) { return modes[i]; }
};

// ---------------------------------------------------------------------------
// Reference

enum class Granularity {
  PosteriorLabeledModes,
  PosteriorUnlabeledModes,
  ExhaustiveModes,
  NonExhaustiveModes,
};

inline constexpr Granularity kAllGranularities[] = {
    Granularity::PosteriorLabeledModes, Granularity::PosteriorUnlabeledModes,
    Granularity::ExhaustiveModes, Granularity::NonExhaustiveModes};

inline std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::PosteriorLabeledModes: return "posterior_labeled";
    case Granularity::PosteriorUnlabeledModes: return "posterior_unlabeled";
    case Granularity::ExhaustiveModes: return "modes_exhaustive";
    case Granularity::NonExhaustiveModes: return "modes_nonexhaustive";
  }
  return "?";
}

inline std::optional<Granularity> parse_granularity(std::string_view s) {
  for (Granularity g : kAllGranularities)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

inline bool is_posterior(Granularity g) {
  return g == Granularity::PosteriorLabeledModes || g == Granularity::PosteriorUnlabeledModes;
}

/// Granularities whose references carry explicit modes.
inline bool has_modes(Granularity g) { return g != Granularity::PosteriorUnlabeledModes; }

struct Reference {
  Granularity granularity = Granularity::ExhaustiveModes;
  std::vector<Mode> modes;
  std::optional<PosteriorSamples> samples;
  /// Mode index per reference sample (-1 for unassigned); labeled posteriors only.
  std::optional<std::vector<int>> sample_labels;

  bool operator==(const Reference&) const = default;
};

inline void validate_reference(Reference& ref) {
  if (is_posterior(ref.granularity)) {
    if (!ref.samples) throw ValidationError("posterior reference requires samples");
  } else if (ref.modes.empty()) {
    throw ValidationError("mode-list reference requires at least one mode");
  }
  if (ref.granularity == Granularity::PosteriorLabeledModes && ref.modes.empty())
    throw ValidationError("labeled posterior reference requires at least one mode");
  for (Mode& m : ref.modes) normalize_mode(m);
  const std::size_t d = ref.samples ? ref.samples->dim() : (ref.modes.empty() ? 0 : ref.modes[0].dim());
  for (const Mode& m : ref.modes)
    if (m.dim() != d) throw ValidationError("reference mode dimension mismatch");
  if (ref.sample_labels) {
    if (!ref.samples || ref.sample_labels->size() != ref.samples->size())
      throw ValidationError("sample_labels length must equal the reference sample count");
    for (int l : *ref.sample_labels)
      if (l < -1 || l >= static_cast<int>(ref.modes.size()))
        throw ValidationError("sample label out of range");
  }
}

/// Attaches per-mode sample subsets to the reference modes of a labeled posterior.
inline void attach_reference_support(Reference& ref) {
  if (!ref.samples || !ref.sample_labels) return;
  for (std::size_t k = 0; k < ref.modes.size(); ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ref.sample_labels->size(); ++i)
      if ((*ref.sample_labels)[i] == static_cast<int>(k)) idx.push_back(i);
    if (!idx.empty())
      ref.modes[k].support = std::make_shared<const PosteriorSamples>(ref.samples->subset(idx));
  }
}

// ---------------------------------------------------------------------------
// ValidationCase

struct PeriodicDim {
  std::size_t index = 0;
  double period = 360.0;
  bool operator==(const PeriodicDim&) const = default;
};

struct Observation {
  Vector y;
  std::map<std::string, double> params;
  bool operator==(const Observation&) const = default;
};

struct ValidationCase {
  std::string id;
  PosteriorSamples prediction;
  /// Natural-log density of the predicted model at each reference sample.
  std::optional<Vector> prediction_log_density;
  Reference reference;
  std::optional<Observation> observation;
  std::vector<PeriodicDim> periodic;

  std::size_t dim() const { return prediction.dim(); }
  bool operator==(const ValidationCase&) const = default;
};

inline void validate_case(ValidationCase& c) {
  validate_reference(c.reference);
  const std::size_t d = c.prediction.dim();
  if (c.reference.samples && c.reference.samples->dim() != d)
    throw ValidationError("reference samples have dimension " +
                          std::to_string(c.reference.samples->dim()) + ", prediction has " +
                          std::to_string(d));
  for (const Mode& m : c.reference.modes)
    if (m.dim() != d) throw ValidationError("reference mode dimension differs from prediction");
  if (c.prediction_log_density) {
    const std::size_t expected = c.reference.samples ? c.reference.samples->size() : 0;
    if (c.prediction_log_density->size() != expected)
      throw ValidationError("prediction_log_density has " +
                            std::to_string(c.prediction_log_density->size()) +
                            " values but the reference has " + std::to_string(expected) +
                            " samples");
  }
  for (const PeriodicDim& p : c.periodic) {
    if (p.index >= d) throw ValidationError("periodic dimension index out of range");
    if (!(p.period > 0.0)) throw ValidationError("period must be positive");
  }
}

// ---------------------------------------------------------------------------
// Fingerprint

struct Fingerprint {
  Granularity reference_granularity = Granularity::ExhaustiveModes;  // P1
  bool resimulation = false;                                          // P2
  bool confidence_score = false;                                      // P3
  bool prediction_density = false;                                    // P4
  bool natural_discretization = false;                                // P5
  bool univariate = false;                                            // P6
  bool accurate_uncertainty = false;                                  // P7

  bool operator==(const Fingerprint&) const = default;

  static constexpr std::size_t kCount = 4 * 64;

  /// Bijection [0, 256) -> fingerprints, used for exhaustive enumeration.
  static Fingerprint from_index(std::size_t i) {
    Fingerprint f;
    f.reference_granularity = kAllGranularities[i / 64];
    f.resimulation = (i >> 0) & 1U;
    f.confidence_score = (i >> 1) & 1U;
    f.prediction_density = (i >> 2) & 1U;
    f.natural_discretization = (i >> 3) & 1U;
    f.univariate = (i >> 4) & 1U;
    f.accurate_uncertainty = (i >> 5) & 1U;
    return f;
  }
};

inline std::vector<Fingerprint> all_fingerprints() {
  std::vector<Fingerprint> out;
  for (std::size_t i = 0; i < Fingerprint::kCount; ++i) out.push_back(Fingerprint::from_index(i));
  return out;
}

// ---------------------------------------------------------------------------
// Flagged scalars

namespace flag {
inline constexpr const char* kUpperBound = "upper_bound";
inline constexpr const char* kUndefined = "undefined";
inline constexpr const char* kTargetUnmet = "target_unmet";
inline constexpr const char* kConvention = "convention";
inline constexpr const char* kSmoothed = "smoothed";
}  // namespace flag

/// A reported number together with the caveats that apply to it.
struct Scalar {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::set<std::string> flags;

  bool has(const std::string& f) const { return flags.count(f) > 0; }
  bool operator==(const Scalar& o) const {
    const bool same = value == o.value || (std::isnan(value) && std::isnan(o.value));
    return same && flags == o.flags;
  }
};

}  // namespace postval
