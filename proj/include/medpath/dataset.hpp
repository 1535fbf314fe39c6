#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "medpath/types.hpp"

namespace medpath {

struct Observation {
    double time;
    double value;
};

// Baseline covariates plus irregular per-marker longitudinal observations.
// t0 is the subject's grid anchor (entry time in study-time scenarios, the
// population origin age in age-timescale scenarios). Observation times and
// schedules may differ across markers.
struct SubjectRecord {
    std::string id;
    double t0 = 0.0;
    std::map<std::string, double> baseline;
    std::array<std::vector<Observation>, 3> observations;  // indexed by Process

    const std::vector<Observation>& obs(Process p) const {
        return observations[static_cast<size_t>(p)];
    }
    std::vector<Observation>& obs(Process p) {
        return observations[static_cast<size_t>(p)];
    }

    int n_obs() const {
        int n = 0;
        for (const auto& v : observations) n += static_cast<int>(v.size());
        return n;
    }

    // "intercept" resolves to 1; anything else must be a baseline covariate.
    double covariate(const std::string& name) const {
        if (name == "intercept") return 1.0;
        auto it = baseline.find(name);
        if (it == baseline.end())
            throw std::invalid_argument("subject " + id +
                                        ": missing baseline covariate '" +
                                        name + "'");
        return it->second;
    }

    // Throws if an observation is non-finite or precedes t0.
    void validate() const;
};

struct Dataset {
    std::vector<SubjectRecord> subjects;

    size_t size() const { return subjects.size(); }
    void validate() const {
        for (const auto& s : subjects) s.validate();
    }
};

} // namespace medpath
