// Copyright 2026 The CGSP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

struct FixtureRow {
    double t;
    int k;
    double value;
};

inline std::vector<FixtureRow> read_fixture(const std::string& name)
{
    std::ifstream in(std::string(CGSP_FIXTURE_DIR) + "/" + name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    std::string line;
    std::getline(in, line);
    std::vector<FixtureRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        rows.push_back({std::stod(a), std::stoi(b), std::stod(c)});
    }
    return rows;
}
