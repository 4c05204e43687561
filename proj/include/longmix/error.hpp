#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace longmix {

enum class Errc {
    // dataset
    MissingColumn,
    DuplicateTriple,
    NonConstantSmoker,
    UnparseableValue,
    InvalidValue,
    EmptyDataset,
    SingleLevelFactor,
    InvalidSpec,
    // explore
    InsufficientReplicates,
    // lmm
    RhoOutOfDomain,
    SingularDesign,
    NonPositiveDefiniteV,
    DidNotConverge,
    IdentifiabilityError,
    // optim
    NonFiniteObjective,
    DomainError,
    // diagnostics
    DegenerateSample,
    // classical
    ZeroVariance,
    LengthMismatch,
    EmptyCell,
    UnbalancedDesign,
    InvalidDf,
    // simul
    InvalidConfig,
    // cli
    RefusedComparison,
    IoError,
    InvalidArgument,
};

/// Module that owns an error code, e.g. "dataset" for DuplicateTriple.
std::string_view error_module(Errc code) noexcept;
std::string_view error_name(Errc code) noexcept;

/// "module.Name", the form used in CLI messages.
std::string qualified_code(Errc code);

/// Errors that indicate estimation trouble rather than bad input.
bool is_convergence_error(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace longmix
