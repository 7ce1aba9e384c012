#pragma once

#include <torch/torch.h>

#include <sstream>
#include <string>

#include "fewgan/errors.hpp"

namespace fewgan::detail {

inline std::string shape_str(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

inline void require_rank(const torch::Tensor& t, int64_t rank, const std::string& what) {
  if (!t.defined() || t.dim() != rank) {
    throw InvalidArgument(what + ": expected a rank-" + std::to_string(rank) + " tensor, got " +
                          (t.defined() ? shape_str(t) : std::string("undefined")));
  }
}

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b,
                               const std::string& what) {
  if (!a.defined() || !b.defined() || a.sizes() != b.sizes()) {
    throw InvalidArgument(what + ": shape mismatch " + (a.defined() ? shape_str(a) : "undefined") +
                          " vs " + (b.defined() ? shape_str(b) : "undefined"));
  }
}

inline void require_image(const torch::Tensor& x, const std::string& what) {
  require_rank(x, 4, what);
  if (x.size(1) != 3) throw InvalidArgument(what + ": expected 3 channels, got " + shape_str(x));
}

}  // namespace fewgan::detail
