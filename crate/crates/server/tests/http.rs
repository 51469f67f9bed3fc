mod support;

use std::collections::BTreeSet;

use reqwest::Method;
use serde_json::json;
use support::{qs, Server};

fn demo() -> Server {
    Server::demo("memory")
}

#[test]
fn unauthenticated_and_unknown_routes() {
    let srv = demo();
    let mut anon = srv.anon();
    let r = anon.get("/assets");
    assert_eq!((r.status, r.code()), (401, "UNKNOWN_SESSION"));
    let r = anon.get("/nowhere");
    assert_eq!((r.status, r.code()), (404, "NO_SUCH_ROUTE"));
    let mut a = srv.admin();
    let r = a.send(Method::DELETE, "/assets/1", None);
    assert_eq!(r.status, 405);
}

#[test]
fn bearer_header_works_like_the_cookie() {
    let srv = demo();
    let a = srv.admin();
    let token = a.cookie.clone().unwrap().split_once('=').unwrap().1.to_string();
    let r = reqwest::blocking::Client::new()
        .get(format!("{}/menu", srv.base))
        .bearer_auth(token)
        .send()
        .unwrap();
    assert_eq!(r.status(), 200);
}

#[test]
fn input_gate() {
    let srv = demo();
    let mut a = srv.admin();
    let long = "x".repeat(5000);
    let r = a.post("/requests/general", json!({"Category": "Technical", "Description": long}));
    assert_eq!((r.status, r.code()), (422, "VALIDATION_FAILED"));
    assert_eq!(r.body["field"], "Description");

    let r = a.get("/assets?admin=1");
    assert_eq!((r.status, r.code()), (422, "VALIDATION_FAILED"));
    assert_eq!(r.body["field"], "admin");

    let r = a.post("/requests/general", json!({"Category": "Technical", "Description": "x", "admin": 1}));
    assert_eq!((r.status, r.code()), (422, "VALIDATION_FAILED"));

    let r = a.send(Method::POST, "/requests/general", Some(json!("not an object")));
    assert_eq!(r.status, 422);
    let r = a.get("/assets/12abc");
    assert_eq!((r.status, r.code()), (422, "VALIDATION_FAILED"));

    let mut t = srv.login("test1", "test1pass");
    let r = t.post("/assets", json!({"BarCode": "z1", "Owner": "ENCS", "Category": "Equipment"}));
    assert_eq!((r.status, r.code()), (403, "FORBIDDEN"));
}

#[test]
fn malformed_json_names_the_body() {
    let srv = demo();
    let a = srv.admin();
    let r = reqwest::blocking::Client::new()
        .post(format!("{}/requests/general", srv.base))
        .header("cookie", a.cookie.clone().unwrap())
        .header("content-type", "application/json")
        .body("{\"Category\": ")
        .send()
        .unwrap();
    assert_eq!(r.status(), 422);
    let body: serde_json::Value = r.json().unwrap();
    assert_eq!(body["field"], "body");
}

#[test]
fn echoed_input_is_escaped() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.post("/requests/general", json!({"Category": "<script>x</script>", "Description": "d"}));
    assert_eq!(r.code(), "BAD_CATEGORY");
    assert!(!r.text.contains("<script>"), "{}", r.text);
    assert!(r.message().contains("&lt;script&gt;"));
}

#[test]
fn same_error_class_same_wire_pair() {
    let srv = demo();
    let mut a = srv.admin();
    let x = a.get("/assets/999");
    let y = a.get("/requests/999");
    let z = a.get("/software/999");
    for r in [&x, &y, &z] {
        assert_eq!((r.status, r.code()), (404, "NOT_FOUND"));
    }
    let r = a.post("/licenses/3/install", json!({"AssetID": 4}));
    assert_eq!((r.status, r.code()), (422, "NOT_A_COMPUTER"));
}

#[test]
fn pagination() {
    let srv = demo();
    let mut a = srv.admin();
    let mut seen = Vec::new();
    for offset in (0..10).step_by(4) {
        let r = a.get(&format!("/assets?offset={offset}&limit=4"));
        assert_eq!(r.status, 200);
        assert_eq!(r.body["total"], 9);
        assert_eq!(r.body["offset"], offset);
        seen.extend(r.ids("ItemId"));
    }
    assert_eq!(seen, (1..=9).collect::<Vec<i64>>());
    for bad in ["limit=0", "limit=501", "offset=-1", "limit=x"] {
        let r = a.get(&format!("/assets?{bad}"));
        assert_eq!(r.status, 422, "{bad}");
    }
    // default page size
    for i in 0..60 {
        let r = a.post("/requests/general", json!({"Category": "Technical", "Description": format!("n{i}")}));
        assert_eq!(r.status, 201);
    }
    let r = a.get(&format!("/requests?{}", qs(&[("status", "Pending")])));
    assert_eq!(r.ids("RequestID").len(), 50);
    assert!(r.body["total"].as_u64().unwrap() > 50);
}

#[test]
fn report_as_json_and_csv() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.get("/assets/report?dimension=Category");
    let rows = r.body["rows"].as_array().unwrap().clone();
    let total: u64 = rows.iter().map(|r| r["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 9);
    let csv = a.get("/assets/report?dimension=Category&format=csv").text;
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("key,count"));
    let parsed: Vec<(String, u64)> = lines
        .map(|l| {
            let (k, v) = l.rsplit_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    let from_json: Vec<(String, u64)> = rows
        .iter()
        .map(|r| (r["key"].as_str().unwrap().to_string(), r["count"].as_u64().unwrap()))
        .collect();
    assert_eq!(parsed, from_json);
    let r = a.get("/assets/report?dimension=Color");
    assert_eq!(r.code(), "UNKNOWN_DIMENSION");
    let r = a.get("/assets/report?dimension=Category&format=xml");
    assert_eq!(r.status, 422);
}

#[test]
fn query_helper_composes_the_box() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.get(&format!(
        "/query/assets/build?{}",
        qs(&[("Type", "Plastic Classroom Chair"), ("Location", "H-623 through H-629")])
    ));
    assert_eq!(
        r.body["q"],
        r#"Location: "H-623 through H-629" AND Type: "Plastic Classroom Chair""#
    );
    let r = a.get("/query/assets/build");
    assert_eq!(r.body["q"], "");
    let r = a.get("/query/assets/build?Nope=1");
    assert_eq!(r.status, 422);
    let r = a.post("/query/assets/parse", json!({"q": "Location: (x"}));
    assert_eq!(r.code(), "SYNTAX_ERROR");
    assert!(r.body["position"].is_u64());
    let r = a.post("/query/assets/parse", json!({"q": "ItemId: abc"}));
    assert_eq!(r.status, 200, "parse alone does not type-check");
    let r = a.get(&format!("/assets?{}", qs(&[("q", "ItemId: abc")])));
    assert_eq!(r.code(), "BAD_VALUE_FOR_TYPE");
    let r = a.get("/query/widgets/schema");
    assert_eq!(r.status, 422);
}

#[test]
fn query_text_and_field_inputs_are_exclusive() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.get(&format!("/assets?{}", qs(&[("q", "Owner: FAS"), ("Owner", "FAS")])));
    assert_eq!(r.status, 422);
    let by_field = a.get(&format!("/assets?{}", qs(&[("owner", "fas")])));
    let by_query = a.get(&format!("/assets?{}", qs(&[("q", "Owner: FAS")])));
    assert_eq!(by_field.ids("ItemId"), vec![7, 8]);
    assert_eq!(by_field.ids("ItemId"), by_query.ids("ItemId"));

    let r = a.get(&format!("/locations?{}", qs(&[("LocationName", "H-6")])));
    assert_eq!(r.ids("LocationID"), vec![2, 3]);
    let r = a.get(&format!("/locations?{}", qs(&[("q", "LocationName: H-6*")])));
    assert_eq!(r.ids("LocationID"), vec![2, 3]);
    let r = a.get(&format!("/locations?{}", qs(&[("q", "LocationName: H-6*"), ("Type", "Room")])));
    assert_eq!(r.status, 422);
}

#[test]
fn department_choice_at_login() {
    let srv = demo();
    let mut c = srv.anon();
    let r = c.post("/auth/login", json!({"UserName": "multi", "Password": "multipass"}));
    assert_eq!(r.body["status"], "choose-department");
    assert!(c.cookie.is_none());
    let ids: BTreeSet<i64> = r.body["departments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["DepartmentID"].as_i64().unwrap())
        .collect();
    assert_eq!(ids, BTreeSet::from([1, 2]));
    let token = r.body["pending_token"].clone();
    let r = c.post("/auth/choose-department", json!({"pending_token": token, "DepartmentID": 5}));
    assert_eq!(r.code(), "NOT_A_MEMBER");
    let r = c.post("/auth/choose-department", json!({"pending_token": token, "DepartmentID": 2}));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["session"]["department_id"], 2);
    assert!(c.cookie.is_some());
}

#[test]
fn password_change_and_reset() {
    let srv = demo();
    let mut c = srv.login("test1", "test1pass");
    let r = c.post(
        "/auth/change-password",
        json!({"OldPassword": "nope", "NewPassword": "n3wpassword", "ConfirmPassword": "n3wpassword"}),
    );
    assert_eq!(r.code(), "OLD_PASSWORD_WRONG");
    let r = c.post(
        "/auth/change-password",
        json!({"OldPassword": "test1pass", "NewPassword": "n3wpassword", "ConfirmPassword": "other"}),
    );
    assert_eq!(r.code(), "MISMATCH");
    let r = c.post(
        "/auth/change-password",
        json!({"OldPassword": "test1pass", "NewPassword": "n3wpassword", "ConfirmPassword": "n3wpassword"}),
    );
    assert_eq!(r.status, 200, "{}", r.text);
    let mut anon = srv.anon();
    let r = anon.post("/auth/login", json!({"UserName": "test1", "Password": "test1pass"}));
    assert_eq!(r.code(), "BAD_CREDENTIALS");
    srv.login("test1", "n3wpassword");

    // reset through the mail outbox
    let ch = anon.get("/auth/challenge");
    let q = ch.body["question"].as_str().unwrap();
    let (a, b) = q.split_once(" + ").unwrap();
    let sum = a.parse::<i64>().unwrap() + b.parse::<i64>().unwrap();
    let wrong = anon.post(
        "/auth/reset-password",
        json!({"UserName": "test1", "challenge_id": ch.body["challenge_id"], "answer": (sum + 1).to_string()}),
    );
    assert_eq!(wrong.code(), "CHALLENGE_FAILED");
    let ch = anon.get("/auth/challenge");
    let q = ch.body["question"].as_str().unwrap();
    let (a, b) = q.split_once(" + ").unwrap();
    let sum = a.parse::<i64>().unwrap() + b.parse::<i64>().unwrap();
    let r = anon.post(
        "/auth/reset-password",
        json!({"UserName": "test1", "challenge_id": ch.body["challenge_id"], "answer": sum.to_string()}),
    );
    assert_eq!(r.status, 200, "{}", r.text);
    let mail = std::fs::read_to_string(&srv.outbox).unwrap();
    let line: serde_json::Value = serde_json::from_str(mail.lines().last().unwrap()).unwrap();
    let token = line["token"].clone();
    let r = anon.post(
        "/auth/reset-password/complete",
        json!({"token": token, "NewPassword": "reset-pass-1", "ConfirmPassword": "reset-pass-1"}),
    );
    assert_eq!(r.status, 200, "{}", r.text);
    srv.login("test1", "reset-pass-1");
    let again = anon.post(
        "/auth/reset-password/complete",
        json!({"token": token, "NewPassword": "reset-pass-2", "ConfirmPassword": "reset-pass-2"}),
    );
    assert_eq!(again.status, 422, "tokens are single use");
}

#[test]
fn account_and_locale() {
    let srv = demo();
    let mut c = srv.login("role2", "role2pass");
    let r = c.get("/account");
    assert_eq!(r.body["account"]["UserName"], "role2");
    assert_eq!(r.body["locale"], "en");
    let r = c.put("/account", json!({"Email": "not-an-address"}));
    assert_eq!(r.code(), "INVALID_EMAIL");
    let r = c.put("/account", json!({"Email": "prof@iufa.example", "FirstName": "Jean"}));
    assert_eq!(r.body["account"]["FirstName"], "Jean");
    let en = c.get("/locations/config");
    let r = c.put("/account/locale", json!({"locale": "fr"}));
    assert_eq!(r.status, 200);
    let fr = c.get("/locations/config");
    assert_eq!(fr.body["locale"], "fr");
    assert_ne!(en.body["fields"], fr.body["fields"]);
    let r = c.put("/account/locale", json!({"locale": "de"}));
    assert_eq!(r.status, 422);
}

#[test]
fn grant_editing() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.put("/admin/roles/1/grants", json!({"asset.search": true}));
    assert_eq!(r.code(), "INCOMPLETE_MAP");
    let r = a.put("/admin/roles/1/grants/no.such", json!({"Authorize": true}));
    assert_eq!(r.code(), "UNKNOWN_PERMISSION");
    let r = a.get("/admin/roles/1/grants");
    let mut all = r.body["grants"].as_object().unwrap().clone();
    for v in all.values_mut() {
        *v = json!(true);
    }
    let r = a.put("/admin/roles/1/grants", json!(all));
    assert_eq!(r.status, 200, "{}", r.text);
    let mut t = srv.login("test1", "test1pass");
    assert!(t.menu_names().iter().any(|m| m == "System Admin"));
    let mut r2 = srv.login("role2", "role2pass");
    assert_eq!(r2.get("/admin/roles/1/grants").status, 403);
}

#[test]
fn software_and_licenses() {
    let srv = demo();
    let mut a = srv.admin();
    let r = a.get("/licenses/expiring?days=365&as_of=2012-01-01");
    let ids: Vec<i64> = r.body["expiring"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["LicenseID"].as_i64().unwrap())
        .collect();
    assert_eq!(ids, vec![2, 3]);
    let r = a.get("/licenses/expiring?days=30&as_of=2013-01-01");
    assert_eq!(r.body["expired"].as_array().unwrap().len(), 2);
    assert_eq!(a.get("/licenses/expiring").status, 422);
    assert_eq!(a.get("/licenses/expiring?days=3&as_of=tomorrow").status, 422);

    // two seats, one already assigned in the fixture
    let r = a.post("/licenses/3/install", json!({"AssetID": 3}));
    assert_eq!((r.status, r.body["Remaining"].as_i64()), (201, Some(0)));
    let r = a.post("/licenses/3/assign", json!({"UserID": 3}));
    assert_eq!((r.status, r.code()), (409, "NO_SEATS_REMAINING"));
    let r = a.get(&format!("/software?{}", qs(&[("q", "LicenseID: 3")])));
    assert_eq!(r.body["total"], 1);
}

#[test]
fn labs_and_groups() {
    let srv = demo();
    let mut a = srv.admin();
    // lab 5 seats two and has two members
    let r = a.post("/locations/5/members", json!({"UserID": 4}));
    assert_eq!((r.status, r.code()), (409, "CAPACITY_EXCEEDED"));
    let r = a.put("/locations/2/responsible", json!({"UserID": 4}));
    assert_eq!(r.code(), "NOT_A_LAB");

    let r = a.delete("/groups/1");
    assert_eq!(r.message(), "Group ID 1 was deleted");
    let active = a.get("/groups");
    assert!(active.ids("GroupID").is_empty());
    let all = a.get("/groups?inactive=1");
    assert_eq!(all.ids("GroupID"), vec![1]);
}

#[test]
fn concurrent_submissions_all_land() {
    let srv = demo();
    let before = srv.counts()["Request"];
    let ids: Vec<i64> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let srv = &srv;
                s.spawn(move || {
                    let mut c = srv.login("role1", "role1pass");
                    (0..20)
                        .map(|i| {
                            let r = c.post(
                                "/requests/general",
                                json!({"Category": "Technical", "Description": format!("{t}/{i}")}),
                            );
                            assert_eq!(r.status, 201, "{}", r.text);
                            r.body["RequestID"].as_i64().unwrap()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let unique: BTreeSet<i64> = ids.iter().copied().collect();
    assert_eq!(unique.len(), 160);
    assert_eq!(srv.counts()["Request"], before + 160);
}

#[test]
fn file_backend_survives_a_restart() {
    let srv = Server::demo("file");
    let mut a = srv.admin();
    let r = a.post("/requests/general", json!({"Category": "Technical", "Description": "persist me"}));
    let id = r.body["RequestID"].as_i64().unwrap();
    let snap = srv.snapshot();
    let path = std::env::temp_dir().join(format!("uuis-restart-{}.json", std::process::id()));
    std::fs::write(&path, &snap).unwrap();
    let store = uuis_core::storage::FileStore::open(&path).unwrap();
    use uuis_core::storage::Gateway;
    let row = store.fetch("Request", uuis_core::storage::EntityId(id)).unwrap();
    assert_eq!(row.str("Description"), "persist me");
    std::fs::remove_file(path).ok();
}
