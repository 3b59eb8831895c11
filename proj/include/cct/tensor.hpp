#ifndef CCT_TENSOR_HPP_
#define CCT_TENSOR_HPP_

#include <Eigen/Dense>

namespace cct {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatrixD = Mat<double>;
using MatrixF = Mat<float>;

} // namespace cct

#endif // CCT_TENSOR_HPP_
