#include "delaysync/textio.hpp"

#include <cstdio>

namespace delaysync {

std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0 as well
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v(i));
  }
  return out + "]";
}

std::string format_matrix(const Eigen::MatrixXd& M) {
  std::string out = "[";
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    if (r) out += ", ";
    out += format_vector(M.row(r).transpose());
  }
  return out + "]";
}

}  // namespace delaysync
