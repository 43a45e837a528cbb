#pragma once
// Shared aliases and error types. Row-major matrices throughout: a row is a
// point, a token, or a code; ops read top-to-bottom like the sequence they
// model.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pointlm {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matf = Mat<float>;
using Matd = Mat<double>;

// All recoverable failures are thrown as (subclasses of) this; the message is
// expected to carry enough context (names, shapes, values) to act on.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct shape_error : error {
  using error::error;
};
struct io_error : error {
  using error::error;
};
struct config_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};
struct vocab_error : error {
  using error::error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw error(msg);
}

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

}  // namespace pointlm
