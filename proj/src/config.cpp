#include "fedsched/config.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "fedsched/sampling.hpp"

namespace fedsched {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

SelectionMode parse_selection(const std::string& s) {
    if (s == "uniform") return SelectionMode::uniform;
    if (s == "by_weight") return SelectionMode::by_weight;
    throw ConfigError("unknown selection mode: " + s);
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "bernoulli") return LossMode::bernoulli;
    if (s == "worst_case") return LossMode::worst_case;
    throw ConfigError("unknown loss mode: " + s);
}

AggregationMode parse_aggregation(const std::string& s) {
    if (s == "scaled_weight_sum") return AggregationMode::scaled_weight_sum;
    if (s == "survivor_mean") return AggregationMode::survivor_mean;
    throw ConfigError("unknown aggregation mode: " + s);
}

const char* selection_name(SelectionMode m) {
    return m == SelectionMode::uniform ? "uniform" : "by_weight";
}
const char* loss_mode_name(LossMode m) {
    return m == LossMode::bernoulli ? "bernoulli" : "worst_case";
}
const char* aggregation_name(AggregationMode m) {
    return m == AggregationMode::scaled_weight_sum ? "scaled_weight_sum" : "survivor_mean";
}

} // namespace

Fleet generate_fleet(const FleetSpec& spec, RngStream rng) {
    spec.validate();
    Fleet fleet;
    fleet.reserve(static_cast<std::size_t>(spec.num_clients));
    for (int j = 0; j < spec.num_clients; ++j) {
        Client c;
        c.id = j;
        c.data_size = std::max(
            1.0, rng.uniform(spec.mean_data_size * (1 - spec.var),
                             spec.mean_data_size * (1 + spec.var)));
        c.chip_coeff = rng.uniform(spec.mean_chip_coeff * (1 - spec.var),
                                   spec.mean_chip_coeff * (1 + spec.var));
        c.unit_power = rng.uniform(spec.mean_unit_power * (1 - spec.var),
                                   spec.mean_unit_power * (1 + spec.var));
        c.f_min = spec.f_min;
        c.f_max = spec.f_max;
        c.weight = 0.0;  // filled by finalize_weights
        fleet.push_back(c);
    }
    finalize_weights(fleet);
    return fleet;
}

void finalize_weights(Fleet& fleet) {
    require(!fleet.empty(), "fleet is empty");
    double sum = 0;
    bool any_set = false;
    for (const auto& c : fleet) {
        if (c.weight != 0.0) any_set = true;
        if (c.weight < 0) throw ConfigError("unnormalizable weights: negative q");
        sum += c.weight;
    }
    if (!any_set) {
        // default q_j proportional to data size
        double total = 0;
        for (const auto& c : fleet) total += c.data_size;
        for (auto& c : fleet) c.weight = c.data_size / total;
    } else {
        for (const auto& c : fleet) {
            if (c.weight <= 0) throw ConfigError("unnormalizable weights: nonpositive q");
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            std::cerr << "fedsched: client weights sum to " << sum << "; renormalizing\n";
        }
        for (auto& c : fleet) c.weight /= sum;
    }
    for (const auto& c : fleet) c.validate();
}

RunConfig parse_config(const json& doc) {
    RunConfig cfg;

    if (doc.contains("system")) {
        const json& s = doc.at("system");
        read_if(s, "total_bandwidth_hz", cfg.system.total_bandwidth_hz);
        read_if(s, "noise_density", cfg.system.noise_density);
        read_if(s, "model_size_bits", cfg.system.model_size_bits);
        read_if(s, "cycles_per_sample", cfg.system.cycles_per_sample);
        read_if(s, "power_weight", cfg.system.power_weight);
        read_if(s, "broadcast_time_s", cfg.system.broadcast_time_s);
        read_if(s, "loss_rate", cfg.system.loss_rate);
        if (s.contains("selection")) cfg.system.selection = parse_selection(s.at("selection"));
        if (s.contains("loss_model")) cfg.system.loss_model = parse_loss_mode(s.at("loss_model"));
        if (s.contains("aggregation"))
            cfg.system.aggregation = parse_aggregation(s.at("aggregation"));
    }
    if (doc.contains("fading")) {
        const json& f = doc.at("fading");
        read_if(f, "base_gain", cfg.system.fading.base_gain);
        read_if(f, "path_exponent", cfg.system.fading.path_exponent);
        read_if(f, "ref_distance", cfg.system.fading.ref_distance);
        read_if(f, "distance", cfg.system.fading.distance);
    }
    if (doc.contains("prune")) {
        const json& p = doc.at("prune");
        read_if(p, "enabled", cfg.system.prune.enabled);
        read_if(p, "rate_percentile", cfg.system.prune.rate_percentile);
        read_if(p, "data_percentile", cfg.system.prune.data_percentile);
    }

    const bool has_clients = doc.contains("clients");
    const bool has_fleet = doc.contains("fleet");
    require(!(has_clients && has_fleet), "config: give either clients or fleet, not both");

    if (has_clients) {
        const json& arr = doc.at("clients");
        require(arr.is_array() && !arr.empty(), "config: clients must be a non-empty array");
        int next_id = 0;
        int gains_count = 0;
        for (const json& cj : arr) {
            Client c;
            c.id = next_id++;
            read_if(cj, "id", c.id);
            require(cj.contains("data_size"), "client missing field data_size");
            c.data_size = cj.at("data_size").get<double>();
            read_if(cj, "weight", c.weight);
            read_if(cj, "chip_coeff", c.chip_coeff);
            read_if(cj, "unit_power", c.unit_power);
            if (cj.contains("channel_gain")) {
                c.channel_gain = cj.at("channel_gain").get<double>();
                ++gains_count;
            }
            read_if(cj, "f_min", c.f_min);
            read_if(cj, "f_max", c.f_max);
            cfg.clients.push_back(c);
        }
        require(gains_count == 0 || gains_count == static_cast<int>(cfg.clients.size()),
                "config: give channel_gain for all clients or none");
        cfg.gains_given = gains_count > 0;
        finalize_weights(cfg.clients);
        cfg.system.num_clients = static_cast<int>(cfg.clients.size());
    } else if (has_fleet) {
        FleetSpec spec;
        const json& f = doc.at("fleet");
        read_if(f, "num_clients", spec.num_clients);
        read_if(f, "mean_data_size", spec.mean_data_size);
        read_if(f, "mean_chip_coeff", spec.mean_chip_coeff);
        read_if(f, "mean_unit_power", spec.mean_unit_power);
        read_if(f, "var", spec.var);
        read_if(f, "f_min", spec.f_min);
        read_if(f, "f_max", spec.f_max);
        spec.validate();
        cfg.fleet_spec = spec;
        cfg.system.num_clients = spec.num_clients;
    } else {
        cfg.fleet_spec = FleetSpec{};  // defaults
    }

    if (doc.contains("constants")) {
        const json& c = doc.at("constants");
        read_if(c, "smoothness", cfg.constants.smoothness);
        read_if(c, "pl_constant", cfg.constants.pl_constant);
        read_if(c, "gradient_bound_sq", cfg.constants.gradient_bound_sq);
        read_if(c, "stochastic_coeff", cfg.constants.stochastic_coeff);
        read_if(c, "sampling_noise_sq", cfg.constants.sampling_noise_sq);
        read_if(c, "bound_ratio", cfg.constants.bound_ratio);
        read_if(c, "init_gradient_ratio", cfg.constants.init_gradient_ratio);
        read_if(c, "noniid_metric", cfg.constants.noniid_metric);
        read_if(c, "initial_gap", cfg.constants.initial_gap);
        cfg.constants.validate();
    }

    read_if(doc, "target_loss", cfg.target_loss);
    require(cfg.target_loss > 0, "target_loss must be > 0");

    if (doc.contains("hyper")) {
        const json& h = doc.at("hyper");
        read_if(h, "participants", cfg.hyper.participants);
        read_if(h, "local_epochs", cfg.hyper.local_epochs);
        read_if(h, "el_max", cfg.hyper.el_max);
        require(cfg.hyper.participants >= 1, "hyper.participants must be >= 1");
        require(cfg.hyper.local_epochs >= 1, "hyper.local_epochs must be >= 1");
    }

    if (doc.contains("sim")) {
        const json& s = doc.at("sim");
        read_if(s, "dimension", cfg.sim.dimension);
        read_if(s, "skew", cfg.sim.skew);
        read_if(s, "minibatch_fraction", cfg.sim.minibatch_fraction);
        read_if(s, "full_batch", cfg.sim.full_batch);
        read_if(s, "ridge", cfg.sim.ridge);
        read_if(s, "label_noise", cfg.sim.label_noise);
        read_if(s, "family", cfg.sim.family);
        read_if(s, "max_epochs", cfg.sim.max_epochs);
        read_if(s, "lr_safety", cfg.sim.lr_safety);
        read_if(s, "lambda_burn_in", cfg.sim.lambda_burn_in);
        read_if(s, "replicas", cfg.sim.replicas);
        require(cfg.sim.family == "quadratic" || cfg.sim.family == "logistic",
                "sim.family must be quadratic or logistic");
        require(cfg.sim.dimension >= 1, "sim.dimension must be >= 1");
        require(cfg.sim.max_epochs >= 1, "sim.max_epochs must be >= 1");
        require(cfg.sim.minibatch_fraction > 0 && cfg.sim.minibatch_fraction <= 1,
                "sim.minibatch_fraction out of (0,1]");
    }

    if (doc.contains("costs")) {
        const json& c = doc.at("costs");
        if (c.contains("upload_unit")) cfg.costs.upload_unit = c.at("upload_unit").get<double>();
        if (c.contains("compute_unit"))
            cfg.costs.compute_unit = c.at("compute_unit").get<double>();
        read_if(c, "broadcast_time", cfg.costs.broadcast_time);
        cfg.system.broadcast_time_s = cfg.costs.broadcast_time;
    }
    cfg.costs.broadcast_time = cfg.system.broadcast_time_s;

    cfg.system.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("config file not found: " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

void resolve_fleet(RunConfig& cfg, RngStream rng) {
    if (cfg.clients.empty()) {
        require(cfg.fleet_spec.has_value(), "config has neither clients nor fleet");
        cfg.clients = generate_fleet(*cfg.fleet_spec, rng.split(1));
    }
    if (!cfg.gains_given) {
        RngStream gain_rng = rng.split(2);
        const auto gains = sample_channel_gains(gain_rng, cfg.system.fading,
                                                static_cast<int>(cfg.clients.size()));
        cfg.clients = with_gains(cfg.clients, gains);
        cfg.gains_given = true;
    }
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    json doc;
    doc["system"] = {{"total_bandwidth_hz", cfg.system.total_bandwidth_hz},
                     {"noise_density", cfg.system.noise_density},
                     {"model_size_bits", cfg.system.model_size_bits},
                     {"cycles_per_sample", cfg.system.cycles_per_sample},
                     {"power_weight", cfg.system.power_weight},
                     {"broadcast_time_s", cfg.system.broadcast_time_s},
                     {"loss_rate", cfg.system.loss_rate},
                     {"selection", selection_name(cfg.system.selection)},
                     {"loss_model", loss_mode_name(cfg.system.loss_model)},
                     {"aggregation", aggregation_name(cfg.system.aggregation)}};
    doc["fading"] = {{"base_gain", cfg.system.fading.base_gain},
                     {"path_exponent", cfg.system.fading.path_exponent},
                     {"ref_distance", cfg.system.fading.ref_distance},
                     {"distance", cfg.system.fading.distance}};
    doc["prune"] = {{"enabled", cfg.system.prune.enabled},
                    {"rate_percentile", cfg.system.prune.rate_percentile},
                    {"data_percentile", cfg.system.prune.data_percentile}};
    json clients = json::array();
    for (const auto& c : cfg.clients) {
        clients.push_back({{"id", c.id},
                           {"data_size", c.data_size},
                           {"weight", c.weight},
                           {"chip_coeff", c.chip_coeff},
                           {"unit_power", c.unit_power},
                           {"channel_gain", c.channel_gain},
                           {"f_min", c.f_min},
                           {"f_max", c.f_max}});
    }
    doc["clients"] = clients;
    doc["constants"] = {{"smoothness", cfg.constants.smoothness},
                        {"pl_constant", cfg.constants.pl_constant},
                        {"gradient_bound_sq", cfg.constants.gradient_bound_sq},
                        {"stochastic_coeff", cfg.constants.stochastic_coeff},
                        {"sampling_noise_sq", cfg.constants.sampling_noise_sq},
                        {"bound_ratio", cfg.constants.bound_ratio},
                        {"init_gradient_ratio", cfg.constants.init_gradient_ratio},
                        {"noniid_metric", cfg.constants.noniid_metric},
                        {"initial_gap", cfg.constants.initial_gap}};
    doc["target_loss"] = cfg.target_loss;
    doc["hyper"] = {{"participants", cfg.hyper.participants},
                    {"local_epochs", cfg.hyper.local_epochs},
                    {"el_max", cfg.hyper.el_max}};
    doc["sim"] = {{"dimension", cfg.sim.dimension},
                  {"skew", cfg.sim.skew},
                  {"minibatch_fraction", cfg.sim.minibatch_fraction},
                  {"full_batch", cfg.sim.full_batch},
                  {"ridge", cfg.sim.ridge},
                  {"label_noise", cfg.sim.label_noise},
                  {"family", cfg.sim.family},
                  {"max_epochs", cfg.sim.max_epochs},
                  {"lr_safety", cfg.sim.lr_safety},
                  {"lambda_burn_in", cfg.sim.lambda_burn_in},
                  {"replicas", cfg.sim.replicas}};
    json costs;
    if (cfg.costs.upload_unit) costs["upload_unit"] = *cfg.costs.upload_unit;
    if (cfg.costs.compute_unit) costs["compute_unit"] = *cfg.costs.compute_unit;
    costs["broadcast_time"] = cfg.costs.broadcast_time;
    doc["costs"] = costs;
    return doc;
}

} // namespace fedsched
