#ifndef FSDE_ERRORS_HPP
#define FSDE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace fsde {

/// Near-zero pivot in the tridiagonal Gram factorization. Signals a state
/// far from the constraint manifold (collapsed segment).
class SingularGramError : public std::runtime_error {
public:
    SingularGramError(int pivot_index, double pivot)
        : std::runtime_error("singular Gram matrix: pivot " +
                             std::to_string(pivot_index) + " = " +
                             std::to_string(pivot)),
          pivot_index(pivot_index), pivot(pivot) {}

    int pivot_index;
    double pivot;
};

/// Newton iteration (implicit step or position projection) failed to reach
/// the residual tolerance. Carries the residual history for diagnostics.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::string what, std::vector<double> residual_history)
        : std::runtime_error(std::move(what)),
          residual_history(std::move(residual_history)) {}

    std::vector<double> residual_history;
};

} // namespace fsde

#endif
