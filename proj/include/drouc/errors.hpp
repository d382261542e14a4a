#pragma once

#include <stdexcept>
#include <string>

namespace drouc {

// Missing or unreadable files; the CLI maps this to exit code 2.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed content inside a file that was read fine; CLI exit code 3.
struct schema_error : std::runtime_error {
    explicit schema_error(const std::string& what) : std::runtime_error(what) {}
};

// Dispatch demand that no amount of committed capacity plus grid can serve
// (only possible with a finite purchase limit).
struct infeasible_error : std::runtime_error {
    explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace drouc
