#include "dce/oracles.hpp"

#include "dce/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dce {

InputBounds InputBounds::uniform(Eigen::Index dim, double lo, double hi) {
  if (!(lo < hi)) {
    throw Error(ErrorCode::kSchemaError, "bounds require lo < hi");
  }
  return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
}

Vector InputBounds::clamp(const Vector& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

OracleHandle::OracleHandle(std::unique_ptr<Classifier> classifier)
    : classifier_(std::move(classifier)) {
  if (!classifier_) throw Error(ErrorCode::kBadConfig, "null classifier");
  bounds_ = classifier_->bounds();
}

Label OracleHandle::classify(const Vector& x) {
  if (x.size() != classifier_->dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query of dim " + std::to_string(x.size()) + ", oracle dim " +
                    std::to_string(classifier_->dim()));
  }
  ++ledger_;
  if (bounds_) return classifier_->label(bounds_->clamp(x));
  return classifier_->label(x);
}

Indicator make_indicator(AttackMode mode, Label source_label,
                         std::optional<Label> target_label) {
  Indicator ind;
  ind.mode = mode;
  ind.source_label = source_label;
  if (mode == AttackMode::kTargeted) {
    if (!target_label) {
      throw Error(ErrorCode::kBadLabels, "targeted mode needs a target label");
    }
    if (*target_label == source_label) {
      throw Error(ErrorCode::kBadLabels, "target label equals source label");
    }
    ind.target_label = *target_label;
  }
  return ind;
}

AdversarialProbe::AdversarialProbe(OracleHandle& oracle, Indicator indicator,
                                   std::uint64_t max_queries)
    : oracle_(&oracle), indicator_(indicator), max_queries_(max_queries) {}

int AdversarialProbe::operator()(const Vector& x) {
  if (oracle_->queries() >= max_queries_) {
    throw BudgetExhausted("query budget of " + std::to_string(max_queries_) +
                          " spent");
  }
  return indicator_(oracle_->classify(x));
}

std::uint64_t AdversarialProbe::remaining() const {
  const auto used = oracle_->queries();
  return used >= max_queries_ ? 0 : max_queries_ - used;
}

// ---------------------------------------------------------------------------

HalfspaceClassifier::HalfspaceClassifier(Vector normal, double offset)
    : normal_(std::move(normal)), offset_(offset) {
  const double n = normal_.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::kBadConfig, "halfspace normal is zero");
  // Keep the same boundary set when normalizing.
  normal_ /= n;
  offset_ /= n;
}

Label HalfspaceClassifier::label(const Vector& x) {
  return normal_.dot(x) >= offset_ ? 1 : 0;
}

std::optional<Vector> HalfspaceClassifier::witness(Label label) const {
  const double shift = label == 1 ? 1.0 : -1.0;
  return Vector((offset_ + shift) * normal_);
}

double HalfspaceClassifier::boundary_distance(const Vector& x) const {
  return std::abs(normal_.dot(x) - offset_);
}

SphereClassifier::SphereClassifier(Vector center, double radius,
                                   Label inside_label, Label outside_label)
    : center_(std::move(center)),
      radius_(radius),
      inside_label_(inside_label),
      outside_label_(outside_label) {
  if (!(radius_ > 0.0)) throw Error(ErrorCode::kBadConfig, "sphere radius <= 0");
  if (inside_label_ == outside_label_) {
    throw Error(ErrorCode::kBadLabels, "sphere labels must differ");
  }
}

Label SphereClassifier::label(const Vector& x) {
  return (x - center_).squaredNorm() <= radius_ * radius_ ? inside_label_
                                                          : outside_label_;
}

std::optional<Vector> SphereClassifier::witness(Label label) const {
  if (label == inside_label_) return center_;
  if (label == outside_label_) {
    Vector p = center_;
    p(0) += 2.0 * radius_;
    return p;
  }
  return std::nullopt;
}

double SphereClassifier::boundary_distance(const Vector& x) const {
  return std::abs((x - center_).norm() - radius_);
}

Circle2dClassifier::Circle2dClassifier(double cx, double cy, double radius,
                                       Eigen::Index dim)
    : cx_(cx), cy_(cy), radius_(radius), dim_(dim) {
  if (!(radius_ > 0.0)) throw Error(ErrorCode::kBadConfig, "circle radius <= 0");
  if (dim_ < 2) throw Error(ErrorCode::kBadConfig, "circle2d needs dim >= 2");
}

Label Circle2dClassifier::label(const Vector& x) {
  const double dx = x(0) - cx_;
  const double dy = x(1) - cy_;
  return dx * dx + dy * dy <= radius_ * radius_ ? 1 : 0;
}

std::optional<Vector> Circle2dClassifier::witness(Label label) const {
  Vector p = Vector::Zero(dim_);
  p(0) = cx_ + (label == 1 ? 0.0 : 2.0 * radius_);
  p(1) = cy_;
  return p;
}

double Circle2dClassifier::normal_curvature(const Vector&, const Vector& t) const {
  // Cylinder over the disc: only the in-plane tangent component curves.
  const double in_plane = t(0) * t(0) + t(1) * t(1);
  return in_plane / radius_;
}

double Circle2dClassifier::boundary_distance(const Vector& x) const {
  return std::abs(std::hypot(x(0) - cx_, x(1) - cy_) - radius_);
}

QuadricClassifier::QuadricClassifier(Matrix q, Vector center)
    : q_(std::move(q)), center_(std::move(center)) {
  if (q_.rows() != q_.cols() || q_.rows() != center_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "quadric Q must be D x D");
  }
  q_ = 0.5 * (q_ + q_.transpose()).eval();
}

Label QuadricClassifier::label(const Vector& x) {
  const Vector d = x - center_;
  return d.dot(q_ * d) <= 1.0 ? 1 : 0;
}

std::optional<Vector> QuadricClassifier::witness(Label label) const {
  if (label == 1) return center_;
  return std::nullopt;
}

double QuadricClassifier::normal_curvature(const Vector& x, const Vector& t) const {
  const Vector d = x - center_;
  const Vector grad = 2.0 * (q_ * d);
  return 2.0 * t.dot(q_ * t) / grad.norm();
}

double QuadricClassifier::boundary_distance(const Vector& x) const {
  const Vector d = x - center_;
  const Vector grad = 2.0 * (q_ * d);
  return std::abs(d.dot(q_ * d) - 1.0) / grad.norm();
}

// ---------------------------------------------------------------------------

MlpClassifier::MlpClassifier(std::vector<Layer> layers,
                             std::optional<InputBounds> bounds,
                             std::optional<ImageShape> shape)
    : layers_(std::move(layers)), bounds_(std::move(bounds)), shape_(shape) {
  if (layers_.empty()) throw Error(ErrorCode::kSchemaError, "no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.w.rows() == 0 || l.w.cols() == 0) {
      throw Error(ErrorCode::kSchemaError, "empty weight matrix in layer " +
                                               std::to_string(i));
    }
    if (l.b.size() != l.w.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(i) + " bias size " +
                      std::to_string(l.b.size()) + " != rows " +
                      std::to_string(l.w.rows()));
    }
    if (i > 0 && l.w.cols() != layers_[i - 1].w.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(i) + " input " +
                      std::to_string(l.w.cols()) + " != previous output " +
                      std::to_string(layers_[i - 1].w.rows()));
    }
    if (!l.w.allFinite() || !l.b.allFinite()) {
      throw Error(ErrorCode::kSchemaError,
                  "non-finite weights in layer " + std::to_string(i));
    }
  }
  if (bounds_ && (bounds_->lo.size() != dim() || bounds_->hi.size() != dim())) {
    throw Error(ErrorCode::kDimensionMismatch, "bounds dimension");
  }
  if (shape_ && shape_->size() != dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "image shape != input dim");
  }
}

Vector MlpClassifier::logits(const Vector& x) const {
  Vector h = x;
  for (const Layer& l : layers_) {
    h = l.w * h + l.b;
    if (l.act == Activation::kRelu) h = h.cwiseMax(0.0);
  }
  return h;
}

Label MlpClassifier::label(const Vector& x) {
  Eigen::Index best = 0;
  logits(x).maxCoeff(&best);
  return static_cast<Label>(best);
}

namespace {

using nlohmann::json;

double number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  // nlohmann serializes NaN as null; treat it as the NaN it was.
  if (v.is_null()) {
    throw Error(ErrorCode::kSchemaError, "non-finite value at " + where);
  }
  throw Error(ErrorCode::kSchemaError, "expected number at " + where);
}

Vector vector_of(const json& v, const std::string& where) {
  if (!v.is_array()) throw Error(ErrorCode::kSchemaError, "expected array at " + where);
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = number(v[i], where);
  }
  return out;
}

Matrix matrix_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || !v.front().is_array()) {
    throw Error(ErrorCode::kSchemaError, "expected matrix at " + where);
  }
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v.front().size());
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged matrix at " + where);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = number(row[static_cast<std::size_t>(c)], where);
    }
  }
  return out;
}

}  // namespace

std::unique_ptr<MlpClassifier> parse_weights_classifier(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaError, std::string("weights JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array() ||
      doc["layers"].empty()) {
    throw Error(ErrorCode::kSchemaError, "weights file needs a nonempty \"layers\" array");
  }
  std::vector<MlpClassifier::Layer> layers;
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const json& l = doc["layers"][i];
    const std::string where = "layers[" + std::to_string(i) + "]";
    if (!l.is_object() || !l.contains("w") || !l.contains("b")) {
      throw Error(ErrorCode::kSchemaError, where + " needs \"w\" and \"b\"");
    }
    MlpClassifier::Layer layer;
    layer.w = matrix_of(l["w"], where + ".w");
    layer.b = vector_of(l["b"], where + ".b");
    const std::string act = l.value("act", "none");
    if (act == "relu") {
      layer.act = MlpClassifier::Activation::kRelu;
    } else if (act == "none") {
      layer.act = MlpClassifier::Activation::kNone;
    } else {
      throw Error(ErrorCode::kSchemaError, where + ": unknown act \"" + act + "\"");
    }
    layers.push_back(std::move(layer));
  }
  const auto dim = layers.front().w.cols();

  std::optional<InputBounds> bounds;
  if (doc.contains("bounds")) {
    const Vector b = vector_of(doc["bounds"], "bounds");
    if (b.size() != 2) throw Error(ErrorCode::kSchemaError, "bounds must be [lo, hi]");
    bounds = InputBounds::uniform(dim, b(0), b(1));
  }
  std::optional<ImageShape> shape;
  if (doc.contains("shape")) {
    const Vector s = vector_of(doc["shape"], "shape");
    if (s.size() != 3) throw Error(ErrorCode::kSchemaError, "shape must be [C,H,W]");
    shape = ImageShape{static_cast<int>(s(0)), static_cast<int>(s(1)),
                       static_cast<int>(s(2))};
  }
  return std::make_unique<MlpClassifier>(std::move(layers), std::move(bounds), shape);
}

OracleHandle load_weights_classifier(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw Error(ErrorCode::kSchemaError, "cannot open weights file " + file.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return OracleHandle(parse_weights_classifier(text.str()));
}

}  // namespace dce
