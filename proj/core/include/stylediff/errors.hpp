#pragma once

#include <stdexcept>
#include <string>

namespace stylediff {

// Error categories; the CLI maps them onto exit codes.
enum class errc {
    parameter,  // bad argument value (range, enum, degenerate input)
    contract,   // cross-component invariant violated (shape mismatch, NaN, plan/model mismatch)
    config,     // invalid run configuration
    io,         // file system / codec failure
    compute,    // runtime numeric failure (NaN loss, divergence)
};

class error : public std::runtime_error {
public:
    error(errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    errc kind() const { return kind_; }

private:
    errc kind_;
};

[[noreturn]] inline void throw_param(const std::string& what) { throw error(errc::parameter, what); }
[[noreturn]] inline void throw_contract(const std::string& what) { throw error(errc::contract, what); }
[[noreturn]] inline void throw_config(const std::string& what) { throw error(errc::config, what); }
[[noreturn]] inline void throw_io(const std::string& what) { throw error(errc::io, what); }
[[noreturn]] inline void throw_compute(const std::string& what) { throw error(errc::compute, what); }

}  // namespace stylediff
