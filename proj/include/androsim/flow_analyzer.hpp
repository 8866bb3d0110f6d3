/*
 * Copyright (C) 2026 The androsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Post-hoc flow analysis: segment an event log into causal flows, compare
// each flow with a catalog of documented flow templates and report how an
// undocumented flow deviates.
//
// Matching discipline:
//  * A flow is Matched by the first registered template whose steps it
//    follows exactly; optional template steps may be absent.
//  * Otherwise the first template the flow kind-aligns with (same call
//    kinds, targets and call ids, sources ignored, leading template steps
//    allowed to be missing) explains the deviation: each step whose source
//    breaks the template is an OriginatorMismatch, and a flow that reaches
//    the kernel without the AF layer the template goes through is a
//    LayerBypass.
//  * With no aligning template the flow is an UnknownFlow.
//  * Every step whose call topology is Discouraged adds a DiscouragedCall.

#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "androsim/core_model.hpp"

namespace androsim {

// Component pattern: "Name_Layer" (exact), "*_Layer" (any component of that
// layer) or "*" (anything).
class ComponentPattern {
  public:
    ComponentPattern() = default;
    explicit ComponentPattern(std::string text) : text_(std::move(text)) {
        if (text_ == "*") return;
        const auto sep = text_.rfind('_');
        if (sep == std::string::npos || sep == 0 || sep + 1 == text_.size()) {
            throw Error(ErrorCode::InvalidArgument, "bad component pattern '" + text_ + "'");
        }
        layer_ = parse_layer(std::string_view(text_).substr(sep + 1));
        const auto name = text_.substr(0, sep);
        if (name != "*") name_ = name;
    }

    bool matches(const ComponentRef& c) const {
        if (!layer_) return true;
        return c.layer == *layer_ && (!name_ || *name_ == c.name);
    }

    std::optional<Layer> layer() const { return layer_; }
    const std::string& text() const { return text_; }
    bool operator==(const ComponentPattern& o) const { return text_ == o.text_; }

  private:
    std::string text_ = "*";
    std::optional<std::string> name_;
    std::optional<Layer> layer_;
};

struct StepPattern {
    CallKind kind = CallKind::Func;
    ComponentPattern source;
    ComponentPattern target;
    std::optional<std::string> call_id;
    bool optional = false;

    bool operator==(const StepPattern&) const = default;
};

struct FlowTemplate {
    std::string name;
    std::vector<StepPattern> steps;

    bool operator==(const FlowTemplate&) const = default;
};

inline void to_json(nlohmann::json& j, const FlowTemplate& t);

inline void validate(const FlowTemplate& t) {
    if (t.name.empty()) throw Error(ErrorCode::InvalidArgument, "template name is empty");
    if (std::none_of(t.steps.begin(), t.steps.end(), [](const StepPattern& s) { return !s.optional; })) {
        throw Error(ErrorCode::InvalidArgument, "template '" + t.name + "' has no required step");
    }
}

enum class FindingKind : std::uint8_t { OriginatorMismatch, LayerBypass, DiscouragedCall, UnknownFlow };

inline constexpr std::string_view to_string(FindingKind k) {
    switch (k) {
        case FindingKind::OriginatorMismatch: return "OriginatorMismatch";
        case FindingKind::LayerBypass: return "LayerBypass";
        case FindingKind::DiscouragedCall: return "DiscouragedCall";
        case FindingKind::UnknownFlow: return "UnknownFlow";
    }
    return "?";
}

struct Finding {
    FindingKind kind = FindingKind::UnknownFlow;
    std::optional<std::size_t> step_index;
    std::string detail;

    bool operator==(const Finding&) const = default;
};

struct Classification {
    enum class Verdict { Matched, Anomalous };

    Verdict verdict = Verdict::Anomalous;
    std::string template_name;  // Matched only
    std::vector<Finding> findings;  // Anomalous only, never empty

    bool matched() const { return verdict == Verdict::Matched; }
    bool has(FindingKind kind, std::optional<std::size_t> step = std::nullopt) const {
        return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) {
            return f.kind == kind && (!step || f.step_index == step);
        });
    }
    bool operator==(const Classification&) const = default;
};

// ---------------------------------------------------------------------------
// Catalog

class TemplateCatalog {
  public:
    void add(FlowTemplate t) {
        validate(t);
        if (find(t.name) != nullptr) throw Error(ErrorCode::DuplicateTemplate, t.name);
        templates_.push_back(std::move(t));
    }

    const FlowTemplate* find(const std::string& name) const {
        auto it = std::find_if(templates_.begin(), templates_.end(),
                               [&](const FlowTemplate& t) { return t.name == name; });
        return it == templates_.end() ? nullptr : &*it;
    }

    const std::vector<FlowTemplate>& templates() const { return templates_; }
    std::size_t size() const { return templates_.size(); }

  private:
    std::vector<FlowTemplate> templates_;
};

inline TemplateCatalog register_template(TemplateCatalog catalog, FlowTemplate t) {
    catalog.add(std::move(t));
    return catalog;
}

inline StepPattern step(CallKind kind, std::string source, std::string target,
                        std::optional<std::string> call_id = std::nullopt, bool optional = false) {
    return StepPattern{kind, ComponentPattern(std::move(source)), ComponentPattern(std::move(target)),
                       std::move(call_id), optional};
}

inline FlowTemplate app_launch_template() {
    return {"app-launch",
            {step(CallKind::Binder, "*_A", "AM_AF", "StartActivity"),
             step(CallKind::Socket, "AM_AF", "ZP_AR", "zygote"),
             step(CallKind::Jni, "ZP_AR", "ZL_L", "ForkAndSpecialize"),
             step(CallKind::Sys, "ZL_L", "Kernel_K", "fork"),
             step(CallKind::Sys, "Kernel_K", "Kernel_K", "kill", true)}};
}

inline FlowTemplate gps_query_template() {
    return {"gps-query",
            {step(CallKind::Binder, "*_A", "LMS_AF"), step(CallKind::Func, "LMS_AF", "GLP_AF"),
             step(CallKind::Jni, "GLP_AF", "GLP_L"), step(CallKind::Dl, "GLP_L", "GL_L"),
             step(CallKind::Sys, "GL_L", "KD_K")}};
}

inline TemplateCatalog builtin_catalog() {
    TemplateCatalog c;
    c.add(app_launch_template());
    c.add(gps_query_template());
    return c;
}

// ---------------------------------------------------------------------------
// Segmentation

// Groups events by causal root; an event joins the flow of its parent.
inline std::vector<Flow> extract_flows(const std::vector<CallEvent>& events) {
    std::vector<Flow> flows;
    std::map<EventId, std::size_t> flow_of;
    for (const auto& e : events) {
        std::size_t index = 0;
        if (!e.parent_id) {
            index = flows.size();
            flows.emplace_back();
        } else {
            auto it = flow_of.find(*e.parent_id);
            if (it == flow_of.end()) {
                throw Error(ErrorCode::DanglingParent, "event " + std::to_string(e.event_id) +
                                                           " references unknown parent " +
                                                           std::to_string(*e.parent_id));
            }
            index = it->second;
        }
        flow_of[e.event_id] = index;
        flows[index].events.push_back(e);
    }
    return flows;
}

// ---------------------------------------------------------------------------
// Matching

namespace detail {

inline bool step_matches(const StepPattern& p, const CallEvent& e, bool check_source) {
    if (p.kind != kind_of(e.call)) return false;
    if (!p.target.matches(e.target)) return false;
    if (p.call_id && *p.call_id != call_label(e.call)) return false;
    return !check_source || p.source.matches(e.source);
}

// Maps flow step i to template step result[i]. Template steps left out must
// be optional, except a leading run when allow_prefix_skip is set.
inline std::optional<std::vector<std::size_t>> align(const Flow& flow, const FlowTemplate& t,
                                                     bool check_source, bool allow_prefix_skip) {
    const auto& events = flow.events;
    const auto& steps = t.steps;
    std::vector<std::size_t> mapping(events.size());

    std::function<bool(std::size_t, std::size_t)> rec = [&](std::size_t fi, std::size_t ti) {
        if (fi == events.size()) {
            for (std::size_t k = ti; k < steps.size(); ++k) {
                if (!steps[k].optional) return false;
            }
            return true;
        }
        if (ti == steps.size()) return false;
        if (step_matches(steps[ti], events[fi], check_source)) {
            mapping[fi] = ti;
            if (rec(fi + 1, ti + 1)) return true;
        }
        return steps[ti].optional && rec(fi, ti + 1);
    };

    const std::size_t max_start = allow_prefix_skip ? steps.size() : 0;
    for (std::size_t start = 0; start <= max_start && start < steps.size(); ++start) {
        if (rec(0, start)) return mapping;
    }
    return std::nullopt;
}

inline bool template_has_layer(const FlowTemplate& t, Layer layer) {
    return std::any_of(t.steps.begin(), t.steps.end(), [layer](const StepPattern& s) {
        return s.source.layer() == layer || s.target.layer() == layer;
    });
}

inline bool reaches_kernel(const Flow& flow) {
    return std::any_of(flow.events.begin(), flow.events.end(),
                       [](const CallEvent& e) { return e.target.layer == Layer::K; });
}

}  // namespace detail

inline Classification match_flow(const Flow& flow, const TemplateCatalog& catalog) {
    if (flow.empty()) throw Error(ErrorCode::EmptyFlow, "cannot classify an empty flow");

    for (const auto& t : catalog.templates()) {
        if (detail::align(flow, t, true, false)) {
            return {Classification::Verdict::Matched, t.name, {}};
        }
    }

    std::vector<Finding> findings;
    bool aligned = false;
    for (const auto& t : catalog.templates()) {
        const auto mapping = detail::align(flow, t, false, true);
        if (!mapping) continue;
        aligned = true;
        for (std::size_t i = 0; i < flow.events.size(); ++i) {
            const auto& expected = t.steps[(*mapping)[i]].source;
            if (!expected.matches(flow.events[i].source)) {
                findings.push_back({FindingKind::OriginatorMismatch, i,
                                    "source " + render(flow.events[i].source) + ", expected " +
                                        expected.text() + " (" + t.name + ")"});
            }
        }
        if ((*mapping)[0] > 0 &&
            std::none_of(findings.begin(), findings.end(), [](const Finding& f) {
                return f.kind == FindingKind::OriginatorMismatch && f.step_index == 0;
            })) {
            findings.push_back({FindingKind::OriginatorMismatch, 0,
                                "flow starts at step " + std::to_string((*mapping)[0]) + " of " +
                                    t.name + ", expected originator " + t.steps[0].source.text()});
        }
        if (detail::reaches_kernel(flow) && !traverses_layer(flow, Layer::AF) &&
            detail::template_has_layer(t, Layer::AF)) {
            findings.push_back({FindingKind::LayerBypass, std::nullopt,
                                "reaches K without traversing AF (" + t.name + " does)"});
        }
        break;
    }
    if (!aligned) {
        findings.push_back({FindingKind::UnknownFlow, std::nullopt, "no template aligns"});
    }

    for (std::size_t i = 0; i < flow.events.size(); ++i) {
        const auto& e = flow.events[i];
        const CallKind kind = kind_of(e.call);
        if (topology_class(kind, e.source.layer, routed_layer(kind, e.target)) ==
            TopologyClass::Discouraged) {
            findings.push_back({FindingKind::DiscouragedCall, i,
                                std::string(to_string(kind)) + " from layer " +
                                    std::string(to_string(e.source.layer))});
        }
    }

    std::stable_sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        constexpr auto kNone = std::numeric_limits<std::size_t>::max();
        return std::tuple(a.step_index.value_or(kNone), a.kind) <
               std::tuple(b.step_index.value_or(kNone), b.kind);
    });
    return {Classification::Verdict::Anomalous, {}, std::move(findings)};
}

// ---------------------------------------------------------------------------
// JSON: {"name": text, "steps": [{"kind", "source", "target", "call_id"?, "optional"}]}

inline void to_json(nlohmann::json& j, const StepPattern& s) {
    j = {{"kind", to_string(s.kind)},
         {"source", s.source.text()},
         {"target", s.target.text()},
         {"optional", s.optional}};
    if (s.call_id) j["call_id"] = *s.call_id;
}

inline void from_json(const nlohmann::json& j, StepPattern& s) {
    s.kind = parse_call_kind(j.at("kind").get<std::string>());
    s.source = ComponentPattern(j.at("source").get<std::string>());
    s.target = ComponentPattern(j.at("target").get<std::string>());
    s.call_id.reset();
    if (j.contains("call_id") && !j["call_id"].is_null()) s.call_id = j["call_id"].get<std::string>();
    s.optional = j.value("optional", false);
}

inline void to_json(nlohmann::json& j, const FlowTemplate& t) {
    j = {{"name", t.name}, {"steps", t.steps}};
}

inline void from_json(const nlohmann::json& j, FlowTemplate& t) {
    t.name = j.at("name").get<std::string>();
    t.steps = j.at("steps").get<std::vector<StepPattern>>();
}

// Accepts a single template, an array of templates, or {"templates": [...]}.
inline TemplateCatalog catalog_from_json(const nlohmann::json& j) {
    TemplateCatalog catalog;
    const nlohmann::json& list = j.is_object() && j.contains("templates") ? j["templates"] : j;
    if (list.is_array()) {
        for (const auto& item : list) catalog.add(item.get<FlowTemplate>());
    } else {
        catalog.add(list.get<FlowTemplate>());
    }
    return catalog;
}

inline void to_json(nlohmann::json& j, const Finding& f) {
    j = {{"kind", to_string(f.kind)},
         {"step_index", f.step_index ? nlohmann::json(*f.step_index) : nlohmann::json(nullptr)},
         {"detail", f.detail}};
}

inline void to_json(nlohmann::json& j, const Classification& c) {
    if (c.matched()) {
        j = {{"verdict", "Matched"}, {"template", c.template_name}};
    } else {
        j = {{"verdict", "Anomalous"}, {"findings", c.findings}};
    }
}

}  // namespace androsim
