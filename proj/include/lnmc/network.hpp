#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "lnmc/protocol.hpp"

namespace lnmc {

class BufferFull : public std::runtime_error {
 public:
  BufferFull() : std::runtime_error("link buffer full") {}
};

class BufferEmpty : public std::runtime_error {
 public:
  BufferEmpty() : std::runtime_error("link buffer empty") {}
};

// Bounded FIFO carrying one direction of the peer link. No loss, no
// duplication, no reordering.
struct LinkBuffer {
  unsigned capacity{1};
  std::vector<Message> queue;

  bool has_room() const { return queue.size() < capacity; }
  bool empty() const { return queue.empty(); }
  std::optional<Message> head() const {
    if (queue.empty()) return std::nullopt;
    return queue.front();
  }

  friend bool operator==(const LinkBuffer&, const LinkBuffer&) = default;
};

// The bidirectional link as a pair of independent unidirectional buffers.
struct DuplexLink {
  LinkBuffer a_to_b;
  LinkBuffer b_to_a;

  LinkBuffer& outbound(Role from) {
    return from == Role::A ? a_to_b : b_to_a;
  }
  const LinkBuffer& outbound(Role from) const {
    return from == Role::A ? a_to_b : b_to_a;
  }
  LinkBuffer& inbound(Role to) { return to == Role::A ? b_to_a : a_to_b; }
  const LinkBuffer& inbound(Role to) const {
    return to == Role::A ? b_to_a : a_to_b;
  }

  friend bool operator==(const DuplexLink&, const DuplexLink&) = default;
};

DuplexLink make_link(unsigned capacity);

// Enqueue into the from-direction buffer. Throws BufferFull when the buffer
// is at capacity; the explorer treats that sending action as disabled
// instead of ever hitting this.
void send(DuplexLink& link, Role from, const Message& m);

// Dequeue the head of the to-direction buffer. Throws BufferEmpty.
Message receive(DuplexLink& link, Role to);

}  // namespace lnmc
