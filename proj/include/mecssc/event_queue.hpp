#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <utility>

#include "core.hpp"

namespace mecssc {

enum class SimEventKind : std::uint8_t {
    DeliverFrame,    // frame coming off a link
    DeliverControl,  // switch-to-controller or controller-to-switch message
    Timer,           // node-internal completion (processing done, next probe)
    Command,         // scripted scenario step
};

inline const char* sim_event_kind_name(SimEventKind k) {
    switch (k) {
        case SimEventKind::DeliverFrame: return "deliver-frame";
        case SimEventKind::DeliverControl: return "deliver-control";
        case SimEventKind::Timer: return "timer";
        case SimEventKind::Command: return "command";
    }
    return "?";
}

struct SimEvent {
    TimeUs time = 0;
    std::uint64_t seq = 0;  // assigned at scheduling, strictly monotone
    SimEventKind kind = SimEventKind::Timer;
    std::function<void()> fn;
};

/// Pending-event set ordered by (time, seq): ties at the same instant resolve
/// in scheduling order, which is what makes runs replayable.
class EventQueue {
  public:
    std::uint64_t schedule(TimeUs time, SimEventKind kind, std::function<void()> fn) {
        std::uint64_t seq = next_seq_++;
        pending_.emplace(std::make_pair(time, seq), SimEvent{time, seq, kind, std::move(fn)});
        return seq;
    }

    bool empty() const noexcept { return pending_.empty(); }
    std::size_t size() const noexcept { return pending_.size(); }

    TimeUs next_time() const { return pending_.begin()->first.first; }

    SimEvent pop() {
        auto node = pending_.extract(pending_.begin());
        return std::move(node.mapped());
    }

  private:
    std::uint64_t next_seq_ = 0;
    std::map<std::pair<TimeUs, std::uint64_t>, SimEvent> pending_;
};

}  // namespace mecssc
