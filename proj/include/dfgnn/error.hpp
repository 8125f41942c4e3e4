#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace dfgnn {

// Error categories map onto the CLI exit-code contract:
// 1 input error, 2 empty result, 3 numeric failure.

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyResultError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Receives non-fatal diagnostics; defaults to stderr.
inline std::function<void(const std::string&)>& warning_handler() {
    static std::function<void(const std::string&)> handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

inline void warn(const std::string& msg) { warning_handler()(msg); }

} // namespace dfgnn
