#include "lincqa/error.hpp"

namespace lincqa {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownRelation: return "UnknownRelation";
    case ErrorCode::kArityMismatch: return "ArityMismatch";
    case ErrorCode::kUnsafeHead: return "UnsafeHead";
    case ErrorCode::kUnknownVariable: return "UnknownVariable";
    case ErrorCode::kSelfJoin: return "SelfJoinRejected";
    case ErrorCode::kNotAcyclic: return "NotAcyclicQuery";
    case ErrorCode::kTooManyAtoms: return "TooManyAtoms";
    case ErrorCode::kNoPpjt: return "NoPpjt";
    case ErrorCode::kInvalidCertificate: return "InvalidCertificate";
    case ErrorCode::kUnboundPredicate: return "UnboundPredicate";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kHeaderMismatch: return "HeaderMismatch";
    case ErrorCode::kRaggedRow: return "RaggedRow";
    case ErrorCode::kTooManyRepairs: return "TooManyRepairs";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kDisconnectedQuery: return "DisconnectedQuery";
  }
  return "Unknown";
}

}  // namespace lincqa
