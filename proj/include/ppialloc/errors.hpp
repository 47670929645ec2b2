#pragma once

#include <stdexcept>
#include <string>

namespace ppialloc {

// Bad argument passed to a statistic or update (non-finite value and so on).
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Statistic requested with too few observations.
struct undefined_statistic : std::domain_error {
    using std::domain_error::domain_error;
};

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ppialloc
