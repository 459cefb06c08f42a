#ifndef DCE_ORACLES_HPP
#define DCE_ORACLES_HPP

#include "dce/plane_geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dce {

using Label = std::int64_t;
using Matrix = Eigen::MatrixXd;

enum class AttackMode { kTargeted, kNonTargeted };

/// Per-coordinate valid input box.
struct InputBounds {
  Vector lo;
  Vector hi;

  static InputBounds uniform(Eigen::Index dim, double lo, double hi);
  Vector clamp(const Vector& x) const;
};

/// (channels, height, width) of image-shaped inputs, row-major per channel.
struct ImageShape {
  int channels = 1;
  int height = 1;
  int width = 1;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(channels) * height * width;
  }
};

/// Top-1 label function. Implementations must be deterministic per input.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Label label(const Vector& x) = 0;
  virtual Eigen::Index dim() const = 0;
  virtual std::optional<InputBounds> bounds() const { return std::nullopt; }
  virtual std::optional<ImageShape> image_shape() const { return std::nullopt; }

  /// A point known to carry `label`, if the classifier can name one. Only
  /// analytic oracles do; initialization falls back to it when random noise
  /// never reaches the adversarial region.
  virtual std::optional<Vector> witness(Label) const { return std::nullopt; }
};

/// Labeled-query endpoint with an exact query ledger. Not thread-safe; each
/// attack run owns its handle.
class OracleHandle {
 public:
  explicit OracleHandle(std::unique_ptr<Classifier> classifier);

  /// One oracle query. Inputs outside the bounds box are clamped first.
  Label classify(const Vector& x);

  std::uint64_t queries() const { return ledger_; }
  Eigen::Index dim() const { return classifier_->dim(); }
  const std::optional<InputBounds>& bounds() const { return bounds_; }
  void set_bounds(std::optional<InputBounds> bounds) { bounds_ = std::move(bounds); }

  Classifier& classifier() { return *classifier_; }
  const Classifier& classifier() const { return *classifier_; }

 private:
  std::unique_ptr<Classifier> classifier_;
  std::optional<InputBounds> bounds_;
  std::uint64_t ledger_ = 0;
};

/// Membership test for the adversarial region.
struct Indicator {
  AttackMode mode = AttackMode::kNonTargeted;
  Label source_label = 0;
  Label target_label = 0;

  /// +1 if `label` is adversarial, -1 otherwise.
  int operator()(Label label) const {
    const bool adversarial = mode == AttackMode::kTargeted
                                 ? label == target_label
                                 : label != source_label;
    return adversarial ? 1 : -1;
  }
};

/// Throws BadLabels when a targeted indicator has target == source.
Indicator make_indicator(AttackMode mode, Label source_label,
                         std::optional<Label> target_label = std::nullopt);

/**
 * The adversarial indicator bound to an oracle and a query budget.
 *
 * Every call is one ledger query. Once the ledger reaches the budget the next
 * call throws BudgetExhausted without touching the oracle.
 */
class AdversarialProbe {
 public:
  static constexpr std::uint64_t kUnlimited =
      std::numeric_limits<std::uint64_t>::max();

  AdversarialProbe(OracleHandle& oracle, Indicator indicator,
                   std::uint64_t max_queries = kUnlimited);

  int operator()(const Vector& x);
  bool adversarial(const Vector& x) { return (*this)(x) == 1; }

  std::uint64_t queries() const { return oracle_->queries(); }
  std::uint64_t remaining() const;
  std::uint64_t budget() const { return max_queries_; }
  const Indicator& indicator() const { return indicator_; }
  OracleHandle& oracle() { return *oracle_; }

 private:
  OracleHandle* oracle_;
  Indicator indicator_;
  std::uint64_t max_queries_;
};

// ---------------------------------------------------------------------------
// Classifiers

class FunctionClassifier : public Classifier {
 public:
  using Fn = std::function<Label(const Vector&)>;
  FunctionClassifier(Eigen::Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

  Label label(const Vector& x) override { return fn_(x); }
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
  Fn fn_;
};

/// Classifiers with closed-form boundary geometry. Label 1 is the region named
/// by each subclass, label 0 its complement.
class AnalyticClassifier : public Classifier {
 public:
  /// Normal curvature of the boundary at boundary point x along the unit
  /// tangent direction t (positive when the label-1 region is convex).
  virtual double normal_curvature(const Vector& x, const Vector& t) const = 0;
  /// Distance from x to the boundary.
  virtual double boundary_distance(const Vector& x) const = 0;
};

/// Label 1 iff <n, x> >= b.
class HalfspaceClassifier : public AnalyticClassifier {
 public:
  HalfspaceClassifier(Vector normal, double offset);

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return normal_.size(); }
  std::optional<Vector> witness(Label label) const override;
  double normal_curvature(const Vector&, const Vector&) const override { return 0.0; }
  double boundary_distance(const Vector& x) const override;

  const Vector& normal() const { return normal_; }
  double offset() const { return offset_; }

 private:
  Vector normal_;  // unit
  double offset_;
};

/// Ball of radius R: inside_label inside, outside_label outside.
class SphereClassifier : public AnalyticClassifier {
 public:
  SphereClassifier(Vector center, double radius, Label inside_label = 1,
                   Label outside_label = 0);

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return center_.size(); }
  std::optional<Vector> witness(Label label) const override;
  double normal_curvature(const Vector&, const Vector&) const override {
    return 1.0 / radius_;
  }
  double boundary_distance(const Vector& x) const override;

  const Vector& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  Vector center_;
  double radius_;
  Label inside_label_;
  Label outside_label_;
};

/// Disc in the first two coordinates: label 1 inside.
class Circle2dClassifier : public AnalyticClassifier {
 public:
  Circle2dClassifier(double cx, double cy, double radius, Eigen::Index dim = 2);

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return dim_; }
  std::optional<Vector> witness(Label label) const override;
  double normal_curvature(const Vector& x, const Vector& t) const override;
  double boundary_distance(const Vector& x) const override;

 private:
  double cx_, cy_, radius_;
  Eigen::Index dim_;
};

/// Label 1 iff (x - c)^T Q (x - c) <= 1.
class QuadricClassifier : public AnalyticClassifier {
 public:
  QuadricClassifier(Matrix q, Vector center);

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return center_.size(); }
  std::optional<Vector> witness(Label label) const override;
  double normal_curvature(const Vector& x, const Vector& t) const override;
  /// Not closed form for general Q; the value is the first-order estimate
  /// |g(x) - 1| / |grad g(x)|.
  double boundary_distance(const Vector& x) const override;

 private:
  Matrix q_;
  Vector center_;
};

/// Dense ReLU network with argmax output.
class MlpClassifier : public Classifier {
 public:
  enum class Activation { kNone, kRelu };
  struct Layer {
    Matrix w;  // out x in
    Vector b;
    Activation act = Activation::kNone;
  };

  MlpClassifier(std::vector<Layer> layers, std::optional<InputBounds> bounds,
                std::optional<ImageShape> shape = std::nullopt);

  Label label(const Vector& x) override;
  Eigen::Index dim() const override { return layers_.front().w.cols(); }
  std::optional<InputBounds> bounds() const override { return bounds_; }
  std::optional<ImageShape> image_shape() const override { return shape_; }

  Vector logits(const Vector& x) const;
  Eigen::Index classes() const { return layers_.back().w.rows(); }

 private:
  std::vector<Layer> layers_;
  std::optional<InputBounds> bounds_;
  std::optional<ImageShape> shape_;
};

/// Parses the weights-file JSON schema:
/// {"layers":[{"w":[[...]],"b":[...],"act":"relu"|"none"}], "bounds":[lo,hi],
///  "shape":[C,H,W]}. "bounds" and "shape" are optional.
std::unique_ptr<MlpClassifier> parse_weights_classifier(const std::string& json_text);
OracleHandle load_weights_classifier(const std::filesystem::path& file);

}  // namespace dce

#endif  // DCE_ORACLES_HPP
