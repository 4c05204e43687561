#include "longmix/error.hpp"

namespace longmix {

std::string_view error_module(Errc code) noexcept {
    switch (code) {
    case Errc::MissingColumn:
    case Errc::DuplicateTriple:
    case Errc::NonConstantSmoker:
    case Errc::UnparseableValue:
    case Errc::InvalidValue:
    case Errc::EmptyDataset:
    case Errc::SingleLevelFactor:
    case Errc::InvalidSpec:
        return "dataset";
    case Errc::InsufficientReplicates:
        return "explore";
    case Errc::RhoOutOfDomain:
    case Errc::SingularDesign:
    case Errc::NonPositiveDefiniteV:
    case Errc::DidNotConverge:
    case Errc::IdentifiabilityError:
        return "lmm";
    case Errc::NonFiniteObjective:
    case Errc::DomainError:
        return "optim";
    case Errc::DegenerateSample:
        return "diagnostics";
    case Errc::ZeroVariance:
    case Errc::LengthMismatch:
    case Errc::EmptyCell:
    case Errc::UnbalancedDesign:
    case Errc::InvalidDf:
        return "classical";
    case Errc::InvalidConfig:
        return "simul";
    case Errc::RefusedComparison:
    case Errc::IoError:
    case Errc::InvalidArgument:
        return "cli";
    }
    return "unknown";
}

std::string_view error_name(Errc code) noexcept {
    switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::DuplicateTriple: return "DuplicateTriple";
    case Errc::NonConstantSmoker: return "NonConstantSmoker";
    case Errc::UnparseableValue: return "UnparseableValue";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::SingleLevelFactor: return "SingleLevelFactor";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InsufficientReplicates: return "InsufficientReplicates";
    case Errc::RhoOutOfDomain: return "RhoOutOfDomain";
    case Errc::SingularDesign: return "SingularDesign";
    case Errc::NonPositiveDefiniteV: return "NonPositiveDefiniteV";
    case Errc::DidNotConverge: return "DidNotConverge";
    case Errc::IdentifiabilityError: return "IdentifiabilityError";
    case Errc::NonFiniteObjective: return "NonFiniteObjective";
    case Errc::DomainError: return "DomainError";
    case Errc::DegenerateSample: return "DegenerateSample";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyCell: return "EmptyCell";
    case Errc::UnbalancedDesign: return "UnbalancedDesign";
    case Errc::InvalidDf: return "InvalidDf";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::RefusedComparison: return "RefusedComparison";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string qualified_code(Errc code) {
    return std::string(error_module(code)) + "." + std::string(error_name(code));
}

bool is_convergence_error(Errc code) noexcept {
    return code == Errc::DidNotConverge || code == Errc::IdentifiabilityError ||
           code == Errc::NonFiniteObjective;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(qualified_code(code) + ": " + message), code_(code) {}

}  // namespace longmix
