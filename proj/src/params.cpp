#include "dynamix/params.hpp"

#include "dynamix/errors.hpp"

#include <cmath>

namespace dynamix {

std::vector<ParamView> parameter_views(DynaMixModel& model) {
    std::vector<ParamView> views;
    views.reserve(model.num_experts() * 3 + 11);
    for (int e = 0; e < model.num_experts(); ++e) {
        ExpertParams& ex = model.experts[e];
        const std::string prefix = "expert" + std::to_string(e);
        views.push_back({prefix + ".A", ex.a.data(), ex.a.size()});
        views.push_back({prefix + ".W", ex.w.data(), ex.w.size()});
        views.push_back({prefix + ".h", ex.h.data(), ex.h.size()});
    }
    GatingParams& gp = model.gating;
    views.push_back({"cnn.conv", gp.conv.data(), gp.conv.size()});
    views.push_back({"cnn.proj", gp.proj.data(), gp.proj.size()});
    views.push_back({"gating.D", gp.d.data(), gp.d.size()});
    views.push_back({"gating.noise_scale", gp.noise_scale.data(), gp.noise_scale.size()});
    views.push_back({"gating.T_att", &gp.t_att, 1});
    views.push_back({"gating.T_exp", &gp.t_exp, 1});
    views.push_back({"mlp.W1", gp.mlp_w1.data(), gp.mlp_w1.size()});
    views.push_back({"mlp.b1", gp.mlp_b1.data(), gp.mlp_b1.size()});
    views.push_back({"mlp.W2", gp.mlp_w2.data(), gp.mlp_w2.size()});
    views.push_back({"mlp.b2", gp.mlp_b2.data(), gp.mlp_b2.size()});
    views.push_back({"latent_lift", model.latent_lift.data(), model.latent_lift.size()});
    return views;
}

std::size_t parameter_count(const DynaMixModel& model) {
    auto views = parameter_views(const_cast<DynaMixModel&>(model));
    std::size_t total = 0;
    for (const auto& v : views) total += v.size;
    return total;
}

GradientSet GradientSet::zeros_like(const DynaMixModel& model) {
    GradientSet g;
    auto views = parameter_views(const_cast<DynaMixModel&>(model));
    g.names.reserve(views.size());
    g.blocks.reserve(views.size());
    for (const auto& v : views) {
        g.names.push_back(v.name);
        g.blocks.emplace_back(v.size, 0.0);
    }
    return g;
}

void GradientSet::zero() {
    for (auto& b : blocks) std::fill(b.begin(), b.end(), 0.0);
}

void GradientSet::add_scaled(const GradientSet& other, double alpha) {
    if (other.blocks.size() != blocks.size()) throw argument_error("gradient shape mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (other.blocks[i].size() != blocks[i].size())
            throw argument_error("gradient block shape mismatch");
        for (std::size_t k = 0; k < blocks[i].size(); ++k)
            blocks[i][k] += alpha * other.blocks[i][k];
    }
}

void GradientSet::scale(double alpha) {
    for (auto& b : blocks)
        for (double& x : b) x *= alpha;
}

bool GradientSet::all_finite() const {
    for (const auto& b : blocks)
        for (double x : b)
            if (!std::isfinite(x)) return false;
    return true;
}

std::size_t GradientSet::total_size() const {
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.size();
    return total;
}

const std::vector<double>& GradientSet::block(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return blocks[i];
    throw argument_error("no gradient block named " + name);
}

std::vector<double>& GradientSet::block(const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return blocks[i];
    throw argument_error("no gradient block named " + name);
}

} // namespace dynamix
