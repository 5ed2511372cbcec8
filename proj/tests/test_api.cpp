#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <string>

#include <fmt/format.h>

#include "support/line_client.hpp"
#include "whan/api/auth.hpp"
#include "whan/api/camera.hpp"
#include "whan/api/http_server.hpp"
#include "whan/api/hub.hpp"
#include "whan/api/protocol.hpp"
#include "whan/api/runtime.hpp"
#include "whan/api/session.hpp"
#include "whan/api/tcp_server.hpp"

using namespace whan;
using namespace whan::api;
using json = nlohmann::json;

namespace {

std::string hex(const wire::Bytes& b) {
  std::string out;
  for (auto x : b) out += fmt::format("{:02x}", x);
  return out;
}

std::unique_ptr<Runtime> demo_runtime(RuntimeOptions opt = {1.0, true}) {
  auto rt = std::make_unique<Runtime>(std::make_unique<HomeSystem>(scenario::demo_scenario()), opt);
  rt->ensure_user("admin", "whan-demo");
  return rt;
}

std::string first(const Session::Reply& r) { return r.lines.empty() ? "" : r.lines.front(); }

}  // namespace

// ---------------------------------------------------------------------------
// Auth
// ---------------------------------------------------------------------------

TEST(Auth, Pbkdf2KnownVectors) {
  const std::string salt = "salt";
  EXPECT_EQ(hex(pbkdf2_sha256("passwd", {reinterpret_cast<const std::uint8_t*>(salt.data()), salt.size()}, 1, 64)),
            "55ac046e56e3089fec1691c22544b605f94185216dde0465e68b9d57c20dacbc"
            "49ca9cccf179b645991664b39d77ef317c71b845b1e30bd509112041d3a19783");
  wire::Bytes s16(16);
  for (int i = 0; i < 16; ++i) s16[i] = static_cast<std::uint8_t>(i);
  auto user = make_user("admin", "whan-demo", s16);
  EXPECT_EQ(hex(user.hash), "3b98bbfb63d3a773dbb5bce2ce6d9b53bddc6fd220641fd9bc0a98c6bc873200");
  EXPECT_EQ(user.algo, "pbkdf2-sha256:10000");
}

TEST(Auth, VerifyAndAlgoTags) {
  auto u = make_user("alice", "s3cret");
  EXPECT_EQ(u.salt.size(), kSaltBytes);
  EXPECT_TRUE(verify_password(u, "s3cret"));
  EXPECT_FALSE(verify_password(u, "s3cret "));
  EXPECT_NE(make_user("alice", "s3cret").salt, u.salt);
  EXPECT_EQ(parse_algo("pbkdf2-sha256:10000"), 10000);
  EXPECT_FALSE(parse_algo("md5:1"));
  EXPECT_FALSE(parse_algo("pbkdf2-sha256:x"));
  u.algo = "scrypt:1";
  EXPECT_FALSE(verify_password(u, "s3cret"));
  EXPECT_FALSE(check_credentials(std::nullopt, "s3cret"));
}

TEST(Auth, StoreLookup) {
  home::Store store;
  store.put_user(make_user("alice", "pw", wire::Bytes(16, 1), 1000));
  EXPECT_TRUE(authenticate(store, "alice", "pw"));
  EXPECT_FALSE(authenticate(store, "alice", "PW"));
  EXPECT_FALSE(authenticate(store, "bob", "pw"));
}

TEST(Auth, RandomToken) {
  auto a = random_token();
  EXPECT_EQ(a.size(), 32u);
  EXPECT_EQ(a.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(a, random_token());
}

// ---------------------------------------------------------------------------
// Camera
// ---------------------------------------------------------------------------

TEST(Camera, PixelFormula) {
  auto f = render_camera_frame(10.0, -152.0, 7);
  ASSERT_EQ(f.rgb.size(), static_cast<std::size_t>(kFrameWidth * kFrameHeight * 3));
  EXPECT_EQ(f.at(0, 0, 0), 10);
  EXPECT_EQ(f.at(0, 0, 1), 0);
  EXPECT_EQ(f.at(0, 0, 2), 7);
  EXPECT_EQ(f.at(159, 119, 0), (159 + 10) % 256);
  EXPECT_EQ(f.at(159, 119, 1), 119);
  auto wrap = render_camera_frame(250.0, 151.5, 300);
  EXPECT_EQ(wrap.at(10, 0, 0), (10 + 250) % 256);
  EXPECT_EQ(wrap.at(0, 0, 1), (152 + 152) % 256);  // round(151.5) = 152
  EXPECT_EQ(wrap.at(0, 0, 2), 300 % 256);
}

TEST(Camera, FramesDifferOnlyInBlue) {
  auto a = render_camera_frame(20, 5, 1);
  auto b = render_camera_frame(20, 5, 2);
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    if (i % 3 == 2) {
      ASSERT_NE(a.rgb[i], b.rgb[i]);
    } else {
      ASSERT_EQ(a.rgb[i], b.rgb[i]);
    }
  }
  EXPECT_EQ(frame_counter(250), 2u);
  EXPECT_EQ(frame_counter(-5), 0u);
}

TEST(Camera, PpmHeader) {
  auto ppm = to_ppm(render_camera_frame(0, 0, 0));
  const std::string header = "P6\n160 120\n255\n";
  EXPECT_EQ(ppm.substr(0, header.size()), header);
  EXPECT_EQ(ppm.size(), header.size() + 160 * 120 * 3);
}

// ---------------------------------------------------------------------------
// Protocol text
// ---------------------------------------------------------------------------

TEST(Protocol, PercentEncoding) {
  EXPECT_EQ(percent_encode("Night Mode"), "Night%20Mode");
  EXPECT_EQ(percent_encode("100%"), "100%25");
  EXPECT_EQ(percent_encode("a\nb"), "a%0Ab");
  EXPECT_EQ(percent_decode("Night%20Mode"), "Night Mode");
  EXPECT_EQ(percent_decode("%4e%4F"), "NO");
  EXPECT_FALSE(percent_decode("bad%2"));
  EXPECT_FALSE(percent_decode("bad%zz"));
  for (std::string s : {"", "plain", "x y%z", "\t\x7f"}) EXPECT_EQ(percent_decode(percent_encode(s)), s);
}

TEST(Protocol, FieldsAndUtf8) {
  auto f = split_fields("  SET  lamp1 level   40 ");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "SET");
  EXPECT_EQ(f[3], "40");
  EXPECT_TRUE(valid_utf8("caf\xc3\xa9"));
  EXPECT_FALSE(valid_utf8("\xc3"));
  EXPECT_FALSE(valid_utf8("\xff"));
}

TEST(Protocol, LineFormats) {
  home::Device lamp{"lamp1", home::DeviceKind::Lamp, home::DeviceState::On, 40};
  EXPECT_EQ(format_state(lamp), "STATE lamp1 On 40");
  EXPECT_EQ(format_reading({"living-temp", 1372680005100LL, "23.50", -70}),
            "READING living-temp 1372680005.100 23.50 -70");
  EXPECT_EQ(format_event({0, home::Severity::Alert, home::EventKind::Intrusion, "motion at hall-pir"}),
            "EVENT Intrusion motion%20at%20hall-pir");
  EXPECT_EQ(format_hist_row({"t", 1372680000000LL, 21.5, -80}, home::DeviceKind::TemperatureSensor),
            "1372680000.000 21.50 -80");
  EXPECT_EQ(format_sample_value(88.0, home::DeviceKind::LightSensor), "88");
}

// ---------------------------------------------------------------------------
// Hub
// ---------------------------------------------------------------------------

TEST(Hub, RoutesBySubscriptionAndOrigin) {
  Hub hub;
  auto a = hub.attach(1);
  auto b = hub.attach(2);
  auto c = hub.attach(3);
  hub.subscribe(1, "living-temp");
  hub.subscribe(2, "*");
  hub.publish(home::ReadingNote{"living-temp", 0, "23.00", -70});
  hub.publish(home::ReadingNote{"living-light", 0, "88", -70});
  hub.publish(home::StateNote{"lamp1", home::DeviceState::On, "40", 3});
  hub.publish(home::EventNote{{0, home::Severity::Alert, home::EventKind::Intrusion, "x"}, std::nullopt});
  EXPECT_EQ(a->drain().size(), 2u);  // temp reading, event
  EXPECT_EQ(b->drain().size(), 4u);
  auto cl = c->drain();
  ASSERT_EQ(cl.size(), 1u);  // only the state it caused
  EXPECT_EQ(cl[0], "STATE lamp1 On 40");
  hub.unsubscribe(1, "living-temp");
  hub.publish(home::ReadingNote{"living-temp", 0, "23.00", -70});
  EXPECT_EQ(a->size(), 0u);
  hub.detach(2);
  EXPECT_EQ(hub.size(), 2u);
}

TEST(Hub, OverflowCutsOffSlowClient) {
  Outbox box;
  for (std::size_t i = 0; i < kOutboxCapacity; ++i) ASSERT_TRUE(box.push("x"));
  EXPECT_FALSE(box.push("one too many"));
  EXPECT_TRUE(box.overflowed());
  EXPECT_FALSE(box.push("later"));
}

TEST(Hub, PopWaitsAndCloses) {
  Outbox box(4);
  EXPECT_FALSE(box.pop(std::chrono::milliseconds(1)));
  box.push("a");
  EXPECT_EQ(box.pop(std::chrono::milliseconds(1)), "a");
  box.close();
  EXPECT_TRUE(box.closed());
  EXPECT_FALSE(box.push("b"));
}

// ---------------------------------------------------------------------------
// Session grammar
// ---------------------------------------------------------------------------

TEST(Session, RequiresAuth) {
  auto rt = demo_runtime();
  Session s(*rt, rt->new_session_id());
  EXPECT_EQ(first(s.handle("GET *")), "ERR 401");
  EXPECT_EQ(first(s.handle("AUTH admin wrong")), "ERR 401");
  EXPECT_EQ(first(s.handle("AUTH admin")), "ERR 400");
  EXPECT_EQ(first(s.handle("AUTH admin whan-demo")), "OK");
  EXPECT_TRUE(s.authenticated());
  EXPECT_EQ(s.user(), "admin");
  auto fails = rt->locked([](HomeSystem& sys) {
    return std::count_if(sys.store().events().begin(), sys.store().events().end(),
                         [](auto& e) { return e.kind == home::EventKind::AuthFailure; });
  });
  EXPECT_EQ(fails, 1);
}

TEST(Session, ErrorCodes) {
  auto rt = demo_runtime();
  Session s(*rt, rt->new_session_id());
  s.handle("AUTH admin whan-demo");
  EXPECT_EQ(first(s.handle("FROB x")), "ERR 400");
  EXPECT_EQ(first(s.handle("")), "ERR 400");
  EXPECT_EQ(first(s.handle("GET nope")), "ERR 404");
  EXPECT_EQ(first(s.handle("SUB nope")), "ERR 404");
  EXPECT_EQ(first(s.handle("SET lamp1 level 140")), "ERR 409");
  EXPECT_EQ(first(s.handle("SET lamp1 colour red")), "ERR 400");
  EXPECT_EQ(first(s.handle("SET lamp1 level")), "ERR 400");
  EXPECT_EQ(first(s.handle("SET living-temp state on")), "ERR 409");
  EXPECT_EQ(first(s.handle("MODE Nope")), "ERR 404");
  EXPECT_EQ(first(s.handle("HIST living-temp 20 10")), "ERR 400");
  EXPECT_EQ(first(s.handle("HIST living-temp abc 10")), "ERR 400");
  EXPECT_EQ(first(s.handle("HIST nope 0 10")), "ERR 404");
  EXPECT_EQ(first(s.handle("GET bad%zz")), "ERR 400");
  EXPECT_EQ(first(s.handle("GET " + std::string(kMaxLine, 'x'))), "ERR 400");
}

TEST(Session, CommandsAndQueries) {
  auto rt = demo_runtime();
  Session s(*rt, rt->new_session_id());
  s.handle("AUTH admin whan-demo");
  EXPECT_EQ(first(s.handle("SET lamp1 level 40")), "OK 1");
  EXPECT_EQ(first(s.handle("SET heater1 setpoint 21")), "OK");
  auto all = s.handle("GET *");
  EXPECT_EQ(all.lines.size(), 7u);
  EXPECT_EQ(all.lines.back(), "OK");
  EXPECT_EQ(first(s.handle("GET cam1")), "STATE cam1 Unknown 0,0");
  EXPECT_EQ(first(s.handle("MODES")), "MODES Night%20Mode");
  EXPECT_EQ(first(s.handle("MODE Night%20Mode")), "OK");
  EXPECT_EQ(first(s.handle("SUB *")), "OK");
  EXPECT_EQ(first(s.handle("UNSUB *")), "OK");
  rt->step(100);
  auto hist = s.handle("HIST living-temp 0 9999999999");
  EXPECT_EQ(hist.lines.front(), "HIST-BEGIN");
  EXPECT_EQ(hist.lines.back(), "HIST-END");
  EXPECT_EQ(hist.lines.size(), 4u);  // readings at +5 s and +10 s
  auto quit = s.handle("QUIT");
  EXPECT_TRUE(quit.close);
  EXPECT_EQ(first(quit), "OK");
}

// ---------------------------------------------------------------------------
// Servers
// ---------------------------------------------------------------------------

TEST(TcpServer, PushesStateToOriginAndRejectsLongLines) {
  auto rt = demo_runtime({20.0, false});
  TcpServer server(*rt, 0, "127.0.0.1");
  server.start();
  rt->start();
  ASSERT_NE(server.port(), 0);

  whan::testing::LineClient c(server.port());
  c.send("AUTH admin whan-demo");
  EXPECT_EQ(c.read_line(), "OK");
  c.send("SET lamp1 state on");
  auto ok = c.read_line();
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->rfind("OK ", 0), 0u);
  // Not subscribed, but the session caused the change.
  EXPECT_EQ(c.wait_for("STATE lamp1"), "STATE lamp1 On 100");

  c.send_raw(std::string(kMaxLine + 10, 'y'));
  EXPECT_EQ(c.wait_for("ERR"), "ERR 400");
  c.send("rest of the long line");  // ends the discarded line
  c.send("GET lamp1");
  EXPECT_EQ(c.wait_for("STATE"), "STATE lamp1 On 100");
  EXPECT_EQ(c.read_line(), "OK");
  c.send("QUIT");
  EXPECT_EQ(c.wait_for("OK"), "OK");
  EXPECT_FALSE(c.read_line(std::chrono::seconds(2)));
  EXPECT_TRUE(c.closed());

  rt->stop();
  server.stop();
}

TEST(TcpServer, PortInUse) {
  auto rt = demo_runtime();
  TcpServer a(*rt, 0, "127.0.0.1");
  a.start();
  TcpServer b(*rt, a.port(), "127.0.0.1");
  EXPECT_THROW(b.start(), std::runtime_error);
  a.stop();
}

TEST(HttpServer, LoginCookieAndApi) {
  auto rt = demo_runtime();
  rt->step(60);
  HttpServer server(*rt, 0, {}, "127.0.0.1");
  server.start();
  httplib::Client cli("127.0.0.1", server.port());

  auto page = cli.Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);

  auto denied = cli.Get("/api/devices");
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 401);
  EXPECT_EQ(cli.Get("/camera/frame.ppm")->status, 401);

  auto bad = cli.Post("/api/login", R"({"user":"admin","password":"nope"})", "application/json");
  EXPECT_EQ(bad->status, 401);
  EXPECT_EQ(cli.Post("/api/login", "not json", "application/json")->status, 400);

  auto login = cli.Post("/api/login", R"({"user":"admin","password":"whan-demo"})", "application/json");
  ASSERT_TRUE(login);
  ASSERT_EQ(login->status, 200);
  auto cookie = login->get_header_value("Set-Cookie");
  ASSERT_EQ(cookie.rfind(std::string(kSessionCookie) + "=", 0), 0u);
  httplib::Headers auth{{"Cookie", cookie.substr(0, cookie.find(';'))}};

  auto devices = cli.Get("/api/devices", auth);
  ASSERT_EQ(devices->status, 200);
  auto dj = json::parse(devices->body);
  ASSERT_EQ(dj.size(), 6u);
  EXPECT_EQ(dj[0]["name"], "living-temp");
  EXPECT_EQ(dj[0]["text"], "28.00");

  auto hist = cli.Get("/api/history?device=living-temp&from=0&to=9999999999", auth);
  ASSERT_EQ(hist->status, 200);
  auto hj = json::parse(hist->body);
  EXPECT_EQ(hj["samples"].size(), 1u);
  EXPECT_DOUBLE_EQ(hj["samples"][0]["value"].get<double>(), 28.0);
  EXPECT_EQ(cli.Get("/api/history?device=nope", auth)->status, 404);
  EXPECT_EQ(cli.Get("/api/history?device=living-temp&from=5&to=1", auth)->status, 400);

  auto cmd = cli.Post("/api/command", auth, R"({"device":"lamp1","property":"level","value":40})", "application/json");
  ASSERT_EQ(cmd->status, 200);
  EXPECT_TRUE(json::parse(cmd->body)["txid"].is_number());
  EXPECT_EQ(cli.Post("/api/command", auth, R"({"device":"lamp1","property":"level","value":400})",
                     "application/json")->status, 409);
  EXPECT_EQ(cli.Post("/api/command", auth, R"({"device":"x","property":"state","value":"on"})",
                     "application/json")->status, 404);
  EXPECT_EQ(cli.Post("/api/mode", auth, R"({"name":"Night Mode"})", "application/json")->status, 200);
  EXPECT_EQ(json::parse(cli.Get("/api/modes", auth)->body)[0]["active"], true);
  EXPECT_EQ(json::parse(cli.Get("/api/rules", auth)->body).size(), 3u);
  EXPECT_EQ(cli.Get("/api/events", auth)->status, 200);

  auto frame = cli.Get("/camera/frame.ppm", auth);
  ASSERT_EQ(frame->status, 200);
  EXPECT_EQ(frame->body.substr(0, 15), "P6\n160 120\n255\n");
  EXPECT_EQ(frame->get_header_value("X-Frame-Counter"), "60");

  EXPECT_EQ(cli.Post("/api/logout", auth, "", "application/json")->status, 200);
  EXPECT_EQ(cli.Get("/api/devices", auth)->status, 401);
  server.stop();
}
