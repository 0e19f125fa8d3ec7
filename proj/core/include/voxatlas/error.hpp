#pragma once

#include <stdexcept>
#include <string>

namespace voxatlas {

enum class errc {
    bounds,
    invalid_interpolation,
    format,
    unsupported_datatype,
    corrupt_file,
    label_domain,
    empty_mask,
    numerical_failure,
    settings,
    no_overlap,
    divergence,
    pairing,
    alignment,
    undefined_metric,
    io,
    config,
};

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace voxatlas
