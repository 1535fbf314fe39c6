#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace medpath {

// The three latent processes of the dynamic system. L is optional.
enum class Process : int { L = 0, M = 1, Y = 2 };

inline constexpr std::array<Process, 3> kAllProcesses{Process::L, Process::M,
                                                      Process::Y};

inline char process_letter(Process p) {
    switch (p) {
    case Process::L: return 'L';
    case Process::M: return 'M';
    case Process::Y: return 'Y';
    }
    throw std::logic_error("invalid process");
}

inline std::string process_name(Process p) {
    return std::string(1, process_letter(p));
}

inline Process process_from_letter(char c) {
    switch (c) {
    case 'L': return Process::L;
    case 'M': return Process::M;
    case 'Y': return Process::Y;
    default:
        throw std::invalid_argument(std::string("unknown marker label: ") + c);
    }
}

// Directed influence edges allowed by the standing assumptions: the outcome
// never feeds back and the mediator never feeds the confounder.
enum class Edge : int { LtoM = 0, LtoY = 1, MtoY = 2 };

inline constexpr std::array<Edge, 3> kAllEdges{Edge::LtoM, Edge::LtoY,
                                               Edge::MtoY};

inline Process edge_target(Edge e) {
    switch (e) {
    case Edge::LtoM: return Process::M;
    case Edge::LtoY: return Process::Y;
    case Edge::MtoY: return Process::Y;
    }
    throw std::logic_error("invalid edge");
}

inline Process edge_source(Edge e) {
    switch (e) {
    case Edge::LtoM: return Process::L;
    case Edge::LtoY: return Process::L;
    case Edge::MtoY: return Process::M;
    }
    throw std::logic_error("invalid edge");
}

// Short tag used in parameter names and config files: "ML" means L -> M
// (target first, matching the alpha^{ML} notation).
inline std::string edge_tag(Edge e) {
    switch (e) {
    case Edge::LtoM: return "ML";
    case Edge::LtoY: return "YL";
    case Edge::MtoY: return "YM";
    }
    throw std::logic_error("invalid edge");
}

inline Edge edge_from_tag(const std::string& tag) {
    if (tag == "ML") return Edge::LtoM;
    if (tag == "YL") return Edge::LtoY;
    if (tag == "YM") return Edge::MtoY;
    throw std::invalid_argument("unknown influence edge tag: " + tag);
}

enum class Timescale : int { TimeInStudy = 0, Age = 1 };

} // namespace medpath
