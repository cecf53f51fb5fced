#pragma once

#include <Eigen/Dense>

#include <iostream>
#include <stdexcept>
#include <string>

namespace vta {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error categories. The CLI maps these onto exit codes:
//   ConfigError -> 2, DataError -> 3, NumericalError -> 4.
// ContractError marks a broken caller contract (bad shapes, out-of-range
// indices) and maps to exit code 2 as well.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

inline void require_config(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

inline void warn(const std::string& msg) { std::cerr << "[vta] warning: " << msg << "\n"; }

}  // namespace vta
