#pragma once

#include <stdexcept>
#include <string>

namespace iie {

// Error taxonomy. Each maps to a CLI exit code in tools/iielab.cpp:
// config/usage errors -> 2, runtime divergence -> 3, internal assertion -> 1.

struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct index_error : std::runtime_error {
    explicit index_error(const std::string& msg) : std::runtime_error("index error: " + msg) {}
};

struct param_error : std::runtime_error {
    explicit param_error(const std::string& msg) : std::runtime_error("parameter error: " + msg) {}
};

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& msg) : std::runtime_error("divergence: " + msg) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct internal_error : std::runtime_error {
    explicit internal_error(const std::string& msg) : std::runtime_error("internal error: " + msg) {}
};

}  // namespace iie
