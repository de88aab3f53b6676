#include "gr1/textenc.hpp"

#include <cctype>
#include <stdexcept>

#include "gr1/rng.hpp"

namespace gr1 {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

uint64_t TextEncoder::token_bucket(const std::string& token) {
  // FNV-1a 64
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h % kBuckets;
}

TextEncoder::TextEncoder(int d_text) : d_text_(d_text) {
  table_.resize(kBuckets, d_text);
  Rng rng(kTableSeed);
  const double scale = 1.0 / std::sqrt(double(d_text));
  for (int r = 0; r < kBuckets; ++r)
    for (int c = 0; c < d_text; ++c)
      table_(r, c) = float(rng.normal(0.0, scale));
}

void TextEncoder::set_table(
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t) {
  if (t.rows() != kBuckets || t.cols() != d_text_)
    throw std::invalid_argument("TextEncoder: table shape mismatch");
  table_ = std::move(t);
}

Eigen::VectorXd TextEncoder::encode(const std::string& text) const {
  auto tokens = tokenize_lower(text);
  if (tokens.empty())
    throw std::invalid_argument("TextEncoder: empty text");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d_text_);
  for (const auto& tok : tokens)
    acc += table_.row(int(token_bucket(tok))).cast<double>().transpose();
  acc /= double(tokens.size());
  double n = acc.norm();
  if (n > 0) acc /= n;
  return acc;
}

}  // namespace gr1
