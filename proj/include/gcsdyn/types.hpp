#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gcsdyn {

using Complex = std::complex<double>;
using VectorC = Eigen::VectorXcd;
using VectorR = Eigen::VectorXd;
using MatrixC = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline const double kSqrtPi = std::sqrt(kPi);

// Collects every problem found in one validation pass instead of stopping at
// the first, so a bad config file reports all its mistakes at once.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    explicit ValidationError(const std::string& issue)
        : ValidationError(std::vector<std::string>{issue}) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string s = "invalid configuration:";
        for (const auto& m : issues) {
            s += "\n  - ";
            s += m;
        }
        return s;
    }

    std::vector<std::string> issues_;
};

// Raised when adaptive time stepping cannot continue. Carries the time at
// which integration failed.
class PropagationError : public std::runtime_error {
public:
    PropagationError(double t, const std::string& msg)
        : std::runtime_error("propagation failed at t=" + std::to_string(t) + ": " + msg),
          t_(t), reason_(msg) {}

    double failure_time() const { return t_; }
    const std::string& reason() const { return reason_; }

private:
    double t_;
    std::string reason_;
};

} // namespace gcsdyn
