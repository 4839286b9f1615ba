#pragma once

// Variable-precision MPFR scalar usable inside Eigen dense algorithms.

#include <boost/multiprecision/mpfr.hpp>
#include <Eigen/Core>
#include <limits>

namespace potts::detail {
using Mp = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>, boost::multiprecision::et_off>;
}

namespace Eigen {
template <>
struct NumTraits<potts::detail::Mp> : GenericNumTraits<potts::detail::Mp> {
    using Mp = potts::detail::Mp;
    using Real = Mp;
    using NonInteger = Mp;
    using Literal = Mp;
    using Nested = Mp;
    enum { IsComplex = 0, IsInteger = 0, IsSigned = 1, RequireInitialization = 1, ReadCost = 10, AddCost = 10, MulCost = 40 };
    static Real epsilon() { return std::numeric_limits<Mp>::epsilon(); }
    static Real dummy_precision() { return std::numeric_limits<Mp>::epsilon() * 1000; }
    static Real highest() { return std::numeric_limits<Mp>::max(); }
    static Real lowest() { return std::numeric_limits<Mp>::lowest(); }
    static Real infinity() { return std::numeric_limits<Mp>::infinity(); }
    static Real quiet_NaN() { return std::numeric_limits<Mp>::quiet_NaN(); }
    static int digits10() { return std::numeric_limits<Mp>::digits10; }
    static int digits() { return std::numeric_limits<Mp>::digits; }
};
}  // namespace Eigen
