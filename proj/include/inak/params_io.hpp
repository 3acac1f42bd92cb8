#pragma once

// JSON parameter documents:
//   { "neuron1": { "C": 1, "g_L": 8, ... }, "neuron2": { ... },
//     "q1": 0.05, "q2": 0.1, "I1": 10, "I2": 20 }
// Missing neuron fields keep the integrator/resonator defaults. Unknown keys
// are rejected so that typos in transcribed tables do not go unnoticed.

#include <fstream>
#include <string>

#include <json.hpp>

#include "inak/error.hpp"
#include "inak/model.hpp"

namespace inak {

namespace detail {

template <class F>
void for_each_param_field(F&& f)
{
    f("C", &NeuronParams::C);
    f("g_L", &NeuronParams::g_L);
    f("E_L", &NeuronParams::E_L);
    f("g_Na", &NeuronParams::g_Na);
    f("E_Na", &NeuronParams::E_Na);
    f("g_K", &NeuronParams::g_K);
    f("E_K", &NeuronParams::E_K);
    f("m_half", &NeuronParams::m_half);
    f("k_m", &NeuronParams::k_m);
    f("n_half", &NeuronParams::n_half);
    f("k_n", &NeuronParams::k_n);
    f("tau", &NeuronParams::tau);
    f("I", &NeuronParams::I);
}

inline double number_field(const nlohmann::json& j, const std::string& key)
{
    if (!j.is_number()) throw Error(ErrorKind::ConfigInvalid, "field '" + key + "' must be a number");
    return j.get<double>();
}

} // namespace detail

[[nodiscard]] inline NeuronParams neuron_from_json(const nlohmann::json& j, NeuronParams base = {})
{
    if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "neuron parameters must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        detail::for_each_param_field([&](const char* name, double NeuronParams::*field) {
            if (key == name) {
                base.*field = detail::number_field(value, key);
                known = true;
            }
        });
        if (!known) throw Error(ErrorKind::ConfigInvalid, "unknown neuron parameter '" + key + "'");
    }
    base.validate();
    return base;
}

[[nodiscard]] inline nlohmann::json to_json(const NeuronParams& p)
{
    nlohmann::json j = nlohmann::json::object();
    detail::for_each_param_field([&](const char* name, double NeuronParams::*field) { j[name] = p.*field; });
    return j;
}

[[nodiscard]] inline CoupledSystem coupled_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "parameter document must be a JSON object");
    NeuronParams n1 = integrator_neuron();
    NeuronParams n2 = resonator_neuron();
    double q1 = 0.05;
    double q2 = 0.0;
    for (const auto& [key, value] : j.items()) {
        if (key == "neuron1") n1 = neuron_from_json(value, n1);
        else if (key == "neuron2") n2 = neuron_from_json(value, n2);
        else if (key == "q1") q1 = detail::number_field(value, key);
        else if (key == "q2") q2 = detail::number_field(value, key);
        else if (key == "I1" || key == "I2") continue;
        else if (key == "description") continue;
        else throw Error(ErrorKind::ConfigInvalid, "unknown top-level key '" + key + "'");
    }
    // Top-level drives override the per-neuron I.
    if (j.contains("I1")) n1.I = detail::number_field(j.at("I1"), "I1");
    if (j.contains("I2")) n2.I = detail::number_field(j.at("I2"), "I2");
    return {n1, n2, q1, q2};
}

[[nodiscard]] inline nlohmann::json to_json(const CoupledSystem& c)
{
    nlohmann::json n1 = to_json(c.neuron1());
    nlohmann::json n2 = to_json(c.neuron2());
    n1.erase("I");
    n2.erase("I");
    return {{"neuron1", n1}, {"neuron2", n2}, {"q1", c.q1()}, {"q2", c.q2()}, {"I1", c.I1()}, {"I2", c.I2()}};
}

[[nodiscard]] inline nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ConfigInvalid, path + ": " + e.what());
    }
}

[[nodiscard]] inline CoupledSystem load_coupled(const std::string& path) { return coupled_from_json(read_json_file(path)); }

} // namespace inak
