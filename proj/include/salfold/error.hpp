#ifndef SALFOLD_ERROR_HPP
#define SALFOLD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace salfold {

enum class Errc {
    // imagecore
    unreadable_file,
    unsupported_format,
    image_too_small,
    grid_too_fine,
    invalid_spec,
    bad_manifest,
    // saliency
    empty_input,
    shape_mismatch,
    corrupt_template_file,
    // folding
    plan_shape_mismatch,
    corrupt_plan_file,
    // lbp
    out_of_bounds,
    block_too_small,
    corrupt_feature_file,
    // svm
    single_class_input,
    non_finite_feature,
    dimension_mismatch,
    corrupt_model_file,
    fingerprint_mismatch,
    // irma
    bad_length,
    bad_character,
    bad_axis_structure,
    length_mismatch,
    // pipeline
    bad_config,
    missing_artifact,
    io_error,
    internal,
};

// Exit-code buckets for the CLI: 1 usage, 2 data, 3 internal.
enum class ErrorCategory { usage = 1, data = 2, internal = 3 };

inline ErrorCategory category(Errc c) {
    switch (c) {
        case Errc::bad_config:
        case Errc::invalid_spec:
            return ErrorCategory::usage;
        case Errc::internal:
            return ErrorCategory::internal;
        default:
            return ErrorCategory::data;
    }
}

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::unreadable_file: return "UnreadableFile";
        case Errc::unsupported_format: return "UnsupportedFormat";
        case Errc::image_too_small: return "ImageTooSmall";
        case Errc::grid_too_fine: return "GridTooFine";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::bad_manifest: return "BadManifest";
        case Errc::empty_input: return "EmptyInput";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::corrupt_template_file: return "CorruptTemplateFile";
        case Errc::plan_shape_mismatch: return "PlanShapeMismatch";
        case Errc::corrupt_plan_file: return "CorruptPlanFile";
        case Errc::out_of_bounds: return "OutOfBounds";
        case Errc::block_too_small: return "BlockTooSmall";
        case Errc::corrupt_feature_file: return "CorruptFeatureFile";
        case Errc::single_class_input: return "SingleClassInput";
        case Errc::non_finite_feature: return "NonFiniteFeature";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::corrupt_model_file: return "CorruptModelFile";
        case Errc::fingerprint_mismatch: return "FingerprintMismatch";
        case Errc::bad_length: return "BadLength";
        case Errc::bad_character: return "BadCharacter";
        case Errc::bad_axis_structure: return "BadAxisStructure";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::bad_config: return "BadConfig";
        case Errc::missing_artifact: return "MissingArtifact";
        case Errc::io_error: return "IoError";
        case Errc::internal: return "Internal";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }
    ErrorCategory cat() const noexcept { return category(code_); }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace salfold

#endif
