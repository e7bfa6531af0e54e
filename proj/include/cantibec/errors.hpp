#ifndef CANTIBEC_ERRORS_HPP
#define CANTIBEC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cantibec {

// Evaluation outside the physical domain (inside the slab, at a surface,
// or with an argument outside its documented range).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Physics-level failure of an otherwise valid request. The category is a
// short machine-readable tag ("over-driven", "non-convergence", ...).
class PhysicsError : public std::runtime_error {
public:
    PhysicsError(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, std::string key = {})
        : std::runtime_error(what), line_(line), key_(std::move(key)) {}

    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    int line_;
    std::string key_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cantibec

#endif
