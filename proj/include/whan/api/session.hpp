#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "whan/api/runtime.hpp"

namespace whan::api {

/// One client connection's view of the line protocol. Transport-agnostic:
/// feed it lines, write back what it returns. Pushes arrive separately
/// through the hub outbox registered under id().
class Session {
 public:
  struct Reply {
    std::vector<std::string> lines;
    bool close = false;
  };

  Session(Runtime& runtime, home::SessionId id);

  Reply handle(std::string_view line);

  home::SessionId id() const { return id_; }
  bool authenticated() const { return authenticated_; }
  const std::string& user() const { return user_; }

 private:
  Reply get(const std::string& device);
  Reply hist(const std::string& device, std::string_view from, std::string_view to);

  Runtime& runtime_;
  home::SessionId id_;
  bool authenticated_ = false;
  std::string user_;
};

/// "ERR 404" etc.
std::string err(home::Status status);

}  // namespace whan::api
