#pragma once

#include "life/core.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace life {

struct BufferItem {
    std::string ref;
    std::string incident; // empty when not tied to an incident
    nlohmann::json payload;
    bool operator==(const BufferItem&) const = default;
};

struct BufferEntry {
    int priority = 0;
    std::uint64_t seq = 0;
    BufferItem item;
    bool operator==(const BufferEntry&) const = default;
};

// Bounded working set. When full, the lowest-priority entry goes first; among
// equal priorities the oldest goes first.
class ShortTermBuffer {
public:
    explicit ShortTermBuffer(std::size_t capacity);

    // Returns the evicted entry, if any. Priority must be in 0..3.
    std::optional<BufferEntry> push(BufferItem item, int priority);

    // Drops every entry tagged with the incident. Returns how many were dropped.
    std::size_t evict_incident(const std::string& incident);

    const std::vector<BufferEntry>& items() const { return items_; }
    // Entries for one incident, highest priority first, then newest first.
    std::vector<BufferEntry> snapshot(const std::string& incident) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    const std::optional<std::string>& current_incident() const { return current_incident_; }
    void set_current_incident(std::optional<std::string> id) { current_incident_ = std::move(id); }

private:
    std::size_t capacity_;
    std::uint64_t next_seq_ = 0;
    std::vector<BufferEntry> items_; // insertion order
    std::optional<std::string> current_incident_;
};

} // namespace life
