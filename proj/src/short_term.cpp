#include "life/short_term.hpp"

#include <algorithm>

namespace life {

ShortTermBuffer::ShortTermBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0)
        throw Error("buffer: capacity must be positive");
}

std::optional<BufferEntry> ShortTermBuffer::push(BufferItem item, int priority) {
    if (priority < 0 || priority > 3)
        throw Error("buffer: priority must be in 0..3");
    items_.push_back({priority, next_seq_++, std::move(item)});
    if (items_.size() <= capacity_)
        return std::nullopt;
    auto victim = std::min_element(items_.begin(), items_.end(), [](const BufferEntry& a, const BufferEntry& b) {
        return a.priority != b.priority ? a.priority < b.priority : a.seq < b.seq;
    });
    BufferEntry evicted = std::move(*victim);
    items_.erase(victim);
    return evicted;
}

std::size_t ShortTermBuffer::evict_incident(const std::string& incident) {
    auto n = std::erase_if(items_, [&](const BufferEntry& e) { return e.item.incident == incident; });
    if (current_incident_ == incident)
        current_incident_.reset();
    return n;
}

std::vector<BufferEntry> ShortTermBuffer::snapshot(const std::string& incident) const {
    std::vector<BufferEntry> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [&](const BufferEntry& e) { return e.item.incident == incident; });
    std::sort(out.begin(), out.end(), [](const BufferEntry& a, const BufferEntry& b) {
        return a.priority != b.priority ? a.priority > b.priority : a.seq > b.seq;
    });
    return out;
}

} // namespace life
