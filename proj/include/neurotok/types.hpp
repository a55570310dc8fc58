#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace neurotok {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Recording bodies are float32 on disk (channel-major); keeping the in-memory
// signal in the same precision makes save/load round-trips bit-exact.
using SignalMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using SampleIndex = std::int64_t;

}  // namespace neurotok
