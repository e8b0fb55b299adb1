#include "lnmc/network.hpp"

namespace lnmc {

DuplexLink make_link(unsigned capacity) {
  DuplexLink link;
  link.a_to_b.capacity = capacity;
  link.b_to_a.capacity = capacity;
  return link;
}

void send(DuplexLink& link, Role from, const Message& m) {
  LinkBuffer& buf = link.outbound(from);
  if (!buf.has_room()) throw BufferFull();
  buf.queue.push_back(m);
}

Message receive(DuplexLink& link, Role to) {
  LinkBuffer& buf = link.inbound(to);
  if (buf.empty()) throw BufferEmpty();
  Message m = buf.queue.front();
  buf.queue.erase(buf.queue.begin());
  return m;
}

}  // namespace lnmc
