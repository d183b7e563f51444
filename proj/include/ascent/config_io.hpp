#pragma once

// JSON loaders for the vehicle and mission configuration files. SI units
// throughout (angles carried as degrees in the files).

#include <fstream>
#include <json.hpp>

#include "ascent/mission.hpp"
#include "ascent/vehicle.hpp"

namespace ascent {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

inline VehicleConfig parse_vehicle(const json& j) {
    VehicleConfig v;
    try {
        for (const auto& js : j.at("stages")) {
            StageSpec s;
            s.name = js.at("name").get<std::string>();
            s.exit_area = js.at("A_e").get<double>();
            s.dry_mass = js.at("dry_mass").get<double>();
            s.ref_surface = js.at("S").get<double>();
            s.drag_coeff = js.at("C_D").get<double>();
            if (js.contains("thrust_table")) {
                for (const auto& row : js.at("thrust_table"))
                    s.profile.samples.push_back(
                        {row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>()});
                s.profile.burn_time = js.at("burn_time").get<double>();
            }
            if (js.contains("constant_thrust")) {
                s.constant_thrust = js.at("constant_thrust").get<double>();
                s.constant_mdot = js.at("constant_mdot").get<double>();
            }
            v.stages.push_back(std::move(s));
        }
        v.fairing_mass = j.at("fairing_mass").get<double>();
        v.m0 = j.at("m0").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("vehicle config: ") + e.what());
    }
    v.validate();
    return v;
}

inline MissionSpec parse_mission(const json& j) {
    MissionSpec m;
    try {
        m.a_des = j.at("orbit").at("a_des").get<double>();
        m.i_des = deg2rad(j.at("orbit").at("i_des_deg").get<double>());
        m.phi_R_des = deg2rad(j.at("splashdown").at("phi_R_des_deg").get<double>());
        m.dV_NA = j.at("dV_NA").get<double>();
        m.Qdot_max = j.at("heat_flux").at("Qdot_max").get<double>();
        m.Qdot_hard = j.at("heat_flux").at("Qdot_hard").get<double>();
        if (j.contains("rate_limit_deg_per_s"))
            m.rate_limit = deg2rad(j.at("rate_limit_deg_per_s").get<double>());
        std::string algo = j.value("algorithm", "multi-return");
        if (algo == "multi-return") m.algorithm = GuidanceAlgorithm::MultiReturn;
        else if (algo == "single-return") m.algorithm = GuidanceAlgorithm::SingleReturn;
        else throw ConfigError("unknown algorithm '" + algo + "'");

        const auto& ji = j.at("initial_state");
        m.ignition.altitude = ji.at("altitude").get<double>();
        m.ignition.speed = ji.at("speed").get<double>();
        m.ignition.flight_path_angle = deg2rad(ji.at("flight_path_angle_deg").get<double>());
        m.ignition.latitude = deg2rad(ji.at("latitude_deg").get<double>());

        for (const auto& jp : j.at("phases")) {
            PhaseSpec p;
            p.index = jp.at("index").get<int>();
            std::string kind = jp.at("kind").get<std::string>();
            if (kind == "propelled-srm") p.kind = PhaseKind::SrmPropelled;
            else if (kind == "propelled-liquid") p.kind = PhaseKind::LiquidPropelled;
            else if (kind == "coast") p.kind = PhaseKind::Coast;
            else if (kind == "ballistic-return") p.kind = PhaseKind::BallisticReturn;
            else throw ConfigError("unknown phase kind '" + kind + "'");
            p.stage = jp.at("stage").get<int>();
            const auto& jd = jp.at("duration");
            if (jd.contains("fixed"))
                p.duration = DurationSpec::fixed_s(jd.at("fixed").get<double>());
            else
                p.duration = DurationSpec::free_s(jd.at("min").get<double>(), jd.at("max").get<double>());
            p.rate_limited = jp.value("rate_limited", false);
            m.phases.push_back(p);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mission config: ") + e.what());
    }
    m.validate();
    return m;
}

inline VehicleConfig load_vehicle(const std::string& path) {
    return parse_vehicle(load_json(path));
}
inline MissionSpec load_mission(const std::string& path) {
    return parse_mission(load_json(path));
}

} // namespace ascent
