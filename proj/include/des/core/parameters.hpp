#pragma once

#include <deque>
#include <string>
#include <vector>

#include "des/core/graph.hpp"

namespace des {

/// Owns a network's named parameters in creation order. Addresses are stable,
/// so layers keep plain pointers into the set.
class ParameterSet {
public:
    ParameterSet() = default;
    ParameterSet(const ParameterSet&) = delete;
    ParameterSet& operator=(const ParameterSet&) = delete;
    ParameterSet(ParameterSet&&) noexcept = default;
    ParameterSet& operator=(ParameterSet&&) noexcept = default;

    /// Throws InvalidInput on a duplicate name.
    Parameter& add(std::string name, Shape shape);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const;
    std::deque<Parameter>& items() noexcept { return params_; }
    const std::deque<Parameter>& items() const noexcept { return params_; }

    /// Copies values by name from `other`; shapes must agree.
    void copy_values_from(const ParameterSet& other);

private:
    std::deque<Parameter> params_;
};

}  // namespace des
