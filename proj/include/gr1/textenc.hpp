#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace gr1 {

// Frozen text embedding: lowercase, whitespace-tokenize, hash each token into
// a fixed random-projection table, average, L2-normalize. No trainable
// parameters; the table is generated once from a build-time seed.
class TextEncoder {
 public:
  static constexpr int kBuckets = 4096;
  static constexpr uint64_t kTableSeed = 0x7e3c7ull;

  explicit TextEncoder(int d_text);

  // Unit-norm embedding; throws on empty/whitespace-only text.
  Eigen::VectorXd encode(const std::string& text) const;

  int dim() const { return d_text_; }

  // Table rows stored as float32: this is the array persisted under the
  // frozen checkpoint namespace.
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>&
  table() const {
    return table_;
  }
  void set_table(
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t);

  static uint64_t token_bucket(const std::string& token);

 private:
  int d_text_;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> table_;
};

std::vector<std::string> tokenize_lower(const std::string& text);

}  // namespace gr1
