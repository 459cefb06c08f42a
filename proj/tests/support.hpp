#ifndef DCE_TESTS_SUPPORT_HPP
#define DCE_TESTS_SUPPORT_HPP

#include "dce/oracles.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace dce::test {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DCE_TEST_DATA_DIR) / name;
}

/// Wraps a classifier and counts how often its label() is actually invoked,
/// independently of the OracleHandle ledger. Optionally logs every input.
class CountingClassifier : public Classifier {
 public:
  CountingClassifier(std::unique_ptr<Classifier> inner, std::uint64_t* calls,
                     std::vector<Vector>* log = nullptr)
      : inner_(std::move(inner)), calls_(calls), log_(log) {}

  Label label(const Vector& x) override {
    ++*calls_;
    if (log_) log_->push_back(x);
    return inner_->label(x);
  }
  Eigen::Index dim() const override { return inner_->dim(); }
  std::optional<InputBounds> bounds() const override { return inner_->bounds(); }
  std::optional<ImageShape> image_shape() const override { return inner_->image_shape(); }
  std::optional<Vector> witness(Label l) const override { return inner_->witness(l); }

 private:
  std::unique_ptr<Classifier> inner_;
  std::uint64_t* calls_;
  std::vector<Vector>* log_;
};

inline OracleHandle counted(std::unique_ptr<Classifier> inner, std::uint64_t* calls,
                            std::vector<Vector>* log = nullptr) {
  return OracleHandle(std::make_unique<CountingClassifier>(std::move(inner), calls, log));
}

inline Vector unit(Eigen::Index dim, Eigen::Index i) {
  Vector v = Vector::Zero(dim);
  v(i) = 1.0;
  return v;
}

inline Vector gaussian(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dce_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dce::test

#endif  // DCE_TESTS_SUPPORT_HPP
