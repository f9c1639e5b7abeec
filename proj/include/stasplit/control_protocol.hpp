#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "twolevel.hpp"

namespace stasplit {

enum class ProtocolKind { faquad, invariant, linear_reference, tabulated };

std::string to_string(ProtocolKind kind);

// Time-dependent (delta, lambda) schedule on [0, t_final].
class ControlProtocol {
public:
    using Evaluator = std::function<TwoLevelHamiltonian(double)>;

    ControlProtocol(ProtocolKind kind, double t_final, Evaluator eval);

    // Throws NumericalError outside [0, t_final] or for non-finite values.
    TwoLevelHamiltonian operator()(double t) const;

    double t_final() const { return t_final_; }
    ProtocolKind kind() const { return kind_; }

private:
    ProtocolKind kind_;
    double t_final_;
    Evaluator eval_;
};

// Cubic spline through uniformly spaced samples starting at t = 0.
ControlProtocol tabulated_protocol(const std::vector<double>& times, const std::vector<double>& delta,
                                   const std::vector<double>& lambda);

ControlProtocol tabulate(const ControlProtocol& protocol, std::size_t n_samples = 4001);

void write_protocol_csv(std::ostream& out, const ControlProtocol& protocol, std::size_t n_rows);
ControlProtocol read_protocol_csv(std::istream& in);

}  // namespace stasplit
