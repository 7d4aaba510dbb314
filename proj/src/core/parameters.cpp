#include "des/core/parameters.hpp"

#include "des/core/error.hpp"

namespace des {

Parameter& ParameterSet::add(std::string name, Shape shape) {
    if (find(name)) throw InvalidInput("duplicate parameter name '" + name + "'");
    params_.push_back(Parameter{std::move(name), Tensor(std::move(shape), 0.0)});
    return params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
    for (Parameter& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->find(name);
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.value.size();
    return n;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    for (Parameter& p : params_) {
        const Parameter* src = other.find(p.name);
        if (!src) throw InvalidInput("parameter '" + p.name + "' missing from source set");
        if (src->value.shape() != p.value.shape()) {
            throw InvalidInput("parameter '" + p.name + "' shape " + shape_str(src->value.shape()) + " != " +
                               shape_str(p.value.shape()));
        }
        p.value = src->value;
    }
}

}  // namespace des
