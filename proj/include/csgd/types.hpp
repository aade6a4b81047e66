#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace csgd {

using Index = std::ptrdiff_t;
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ComponentIndex {
  Index observation = 0;
  Index component = 0;
  friend bool operator==(const ComponentIndex&, const ComponentIndex&) = default;
};

}  // namespace csgd
