#include "rrl/io.hpp"

#include <cstdio>
#include <stdexcept>

namespace rrl {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
}

void CsvWriter::row(std::initializer_list<std::string> fields) {
    row(std::vector<std::string>(fields));
}

nlohmann::json mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;

    auto transition = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto per_action = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = nlohmann::json::array();
            for (int t = 0; t < mdp.n_states; ++t) row.push_back(mdp.p(s, a, t));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    j["transition"] = std::move(transition);

    auto rewards = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto per_action = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto outcomes = nlohmann::json::array();
            for (const auto& o : mdp.outcomes(s, a))
                outcomes.push_back({{"value", o.value}, {"probability", o.probability}});
            per_action.push_back(std::move(outcomes));
        }
        rewards.push_back(std::move(per_action));
    }
    j["reward_model"] = std::move(rewards);

    j["discount"] = std::vector<double>(mdp.discount.data(), mdp.discount.data() + mdp.n_states);
    j["initial_dist"] =
        std::vector<double>(mdp.initial_dist.data(), mdp.initial_dist.data() + mdp.n_states);
    return j;
}

FiniteMdp mdp_from_json(const nlohmann::json& j) {
    FiniteMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();

    mdp.transition.assign(mdp.n_actions, Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states));
    const auto& transition = j.at("transition");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int t = 0; t < mdp.n_states; ++t)
                mdp.transition[a](s, t) = transition.at(s).at(a).at(t).get<double>();

    mdp.reward_model.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    const auto& rewards = j.at("reward_model");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto& outcomes = mdp.reward_model[static_cast<std::size_t>(s) * mdp.n_actions + a];
            for (const auto& o : rewards.at(s).at(a))
                outcomes.push_back(
                    {o.at("value").get<double>(), o.at("probability").get<double>()});
        }

    mdp.discount.resize(mdp.n_states);
    mdp.initial_dist.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        mdp.discount(s) = j.at("discount").at(s).get<double>();
        mdp.initial_dist(s) = j.at("initial_dist").at(s).get<double>();
    }
    return mdp;
}

nlohmann::json policy_to_json(const Policy& policy) {
    auto probs = nlohmann::json::array();
    for (int s = 0; s < policy.n_states(); ++s) {
        auto row = nlohmann::json::array();
        for (int a = 0; a < policy.n_actions(); ++a) row.push_back(policy.probs(s, a));
        probs.push_back(std::move(row));
    }
    return {{"probs", std::move(probs)}};
}

Policy policy_from_json(const nlohmann::json& j) {
    const auto& probs = j.at("probs");
    const int n_states = static_cast<int>(probs.size());
    const int n_actions = static_cast<int>(probs.at(0).size());
    Policy policy;
    policy.probs.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            policy.probs(s, a) = probs.at(s).at(a).get<double>();
    return policy;
}

void save_mdp(const FiniteMdp& mdp, const std::string& path) {
    save_json_file(mdp_to_json(mdp), path);
}

MdpWithPolicy load_mdp(const std::string& path) {
    const nlohmann::json j = load_json_file(path);
    MdpWithPolicy out;
    out.mdp = mdp_from_json(j);
    if (j.contains("policy")) {
        out.policy = policy_from_json(j.at("policy"));
    } else {
        out.policy = uniform_policy(out.mdp.n_states, out.mdp.n_actions);
    }
    const auto errors = validate(out.mdp);
    if (!errors.empty()) throw std::runtime_error("invalid MDP in " + path + ": " + errors[0]);
    return out;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void save_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace rrl
