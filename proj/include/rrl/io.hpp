#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrl/mdp.hpp"

namespace rrl {

/// Shortest decimal form that round-trips a double (up to 17 significant digits).
std::string format_double(double x);

/// RFC-4180 field quoting: fields containing comma, quote, or newline are
/// wrapped in quotes with inner quotes doubled.
std::string csv_escape(const std::string& field);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);

    void row(std::initializer_list<std::string> fields);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
};

nlohmann::json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);

void save_mdp(const FiniteMdp& mdp, const std::string& path);

/// Loads an MDP from a JSON file; if the document carries a "policy" field it
/// is returned as well, otherwise the uniform policy.
MdpWithPolicy load_mdp(const std::string& path);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace rrl
