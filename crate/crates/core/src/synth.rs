//! Synthetic fixture world: a small multi-domain schema, a hand-crafted
//! entity database, and a seeded session generator. Ships with the repo so
//! every pipeline stage can run end to end without external datasets;
//! conversion from real corpora is documented in the README.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ActionState, DialogSession, DialogState, DialogTurn, DomainGoal, Goal};
use crate::dbkit::{query, Entity, EntityDb};
use crate::schema::{DomainDef, Schema};

/// The fixture schema: four task domains plus the `general` pseudo-domain
/// for domain-less acts. Domain slots mirror the entity attributes of the
/// fixture database; booking details (people, time) appear only as act slots
/// and placeholders, never as state constraints.
pub fn fixture_schema() -> Schema {
    let dom = |name: &str, slots: &[&str]| DomainDef {
        name: name.into(),
        slots: slots.iter().map(|s| s.to_string()).collect(),
    };
    Schema {
        domains: vec![
            dom(
                "attraction",
                &["type", "area", "name", "address", "phone", "postcode", "price"],
            ),
            dom(
                "restaurant",
                &["food", "area", "pricerange", "name", "address", "phone", "postcode", "reference"],
            ),
            dom(
                "hotel",
                &["stars", "area", "pricerange", "name", "address", "phone", "postcode", "reference"],
            ),
            dom(
                "train",
                &["destination", "departure", "day", "leave", "arrive", "id", "price", "reference"],
            ),
            dom("general", &[]),
        ],
        acts: [
            "inform", "request", "recommend", "select", "nooffer", "offerbook", "offerbooked",
            "reqmore", "welcome", "bye", "greet",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        placeholders: [
            "name", "type", "area", "food", "pricerange", "stars", "address", "phone",
            "postcode", "price", "choice", "reference", "destination", "departure", "day",
            "leave", "arrive", "id", "people", "time",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    }
}

fn ent(pairs: &[(&str, &str)]) -> Entity {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// The fixture entity database. Hand-enumerable on purpose: exactly three
/// attractions are theatres in the centre.
pub fn fixture_db() -> EntityDb {
    let mut db = EntityDb::new();
    db.insert_domain(
        "attraction",
        vec![
            ent(&[("name", "arts theatre"), ("type", "theatre"), ("area", "centre"), ("address", "6 bene street"), ("phone", "01223 503333"), ("postcode", "cb2 3pj"), ("price", "6 pounds")]),
            ent(&[("name", "festival theatre"), ("type", "theatre"), ("area", "centre"), ("address", "2 wheeler street"), ("phone", "01223 577878"), ("postcode", "cb1 1ln"), ("price", "5 pounds")]),
            ent(&[("name", "corn exchange theatre"), ("type", "theatre"), ("area", "centre"), ("address", "3 parsons court"), ("phone", "01223 357851"), ("postcode", "cb2 3qe"), ("price", "8 pounds")]),
            ent(&[("name", "junction theatre"), ("type", "theatre"), ("area", "east"), ("address", "clifton way"), ("phone", "01223 511511"), ("postcode", "cb1 7gx"), ("price", "7 pounds")]),
            ent(&[("name", "city museum"), ("type", "museum"), ("area", "centre"), ("address", "5 castle street"), ("phone", "01223 355159"), ("postcode", "cb3 0aq"), ("price", "free")]),
            ent(&[("name", "science museum"), ("type", "museum"), ("area", "west"), ("address", "11 downing street"), ("phone", "01223 333456"), ("postcode", "cb2 3dz"), ("price", "free")]),
            ent(&[("name", "folk museum"), ("type", "museum"), ("area", "north"), ("address", "2 castle street"), ("phone", "01223 355159"), ("postcode", "cb3 0aj"), ("price", "3 pounds")]),
            ent(&[("name", "old college"), ("type", "college"), ("area", "centre"), ("address", "trinity lane"), ("phone", "01223 332500"), ("postcode", "cb2 1tn"), ("price", "2 pounds")]),
            ent(&[("name", "river college"), ("type", "college"), ("area", "west"), ("address", "queens road"), ("phone", "01223 335511"), ("postcode", "cb3 9et"), ("price", "free")]),
            ent(&[("name", "willow park"), ("type", "park"), ("area", "north"), ("address", "milton road"), ("phone", "01223 420075"), ("postcode", "cb4 1xh"), ("price", "free")]),
            ent(&[("name", "meadow park"), ("type", "park"), ("area", "south"), ("address", "fen causeway"), ("phone", "01223 302580"), ("postcode", "cb2 8ad"), ("price", "free")]),
            ent(&[("name", "grand cinema"), ("type", "cinema"), ("area", "south"), ("address", "cambridge leisure park"), ("phone", "01223 460442"), ("postcode", "cb1 7dy"), ("price", "9 pounds")]),
        ],
    );
    db.insert_domain(
        "restaurant",
        vec![
            ent(&[("name", "la margherita"), ("food", "italian"), ("area", "west"), ("pricerange", "cheap"), ("address", "15 magdalene street"), ("phone", "01223 315232"), ("postcode", "cb3 0af")]),
            ent(&[("name", "caffe uno"), ("food", "italian"), ("area", "centre"), ("pricerange", "expensive"), ("address", "32 bridge street"), ("phone", "01223 448620"), ("postcode", "cb2 1uj")]),
            ent(&[("name", "pizzeria verde"), ("food", "italian"), ("area", "east"), ("pricerange", "moderate"), ("address", "7 newmarket road"), ("phone", "01223 324033"), ("postcode", "cb5 8jb")]),
            ent(&[("name", "golden wok"), ("food", "chinese"), ("area", "north"), ("pricerange", "moderate"), ("address", "191 histon road"), ("phone", "01223 350688"), ("postcode", "cb4 3hl")]),
            ent(&[("name", "jade garden"), ("food", "chinese"), ("area", "centre"), ("pricerange", "cheap"), ("address", "40 mill road"), ("phone", "01223 367755"), ("postcode", "cb1 2ad")]),
            ent(&[("name", "curry prince"), ("food", "indian"), ("area", "east"), ("pricerange", "moderate"), ("address", "451 newmarket road"), ("phone", "01223 566388"), ("postcode", "cb5 8jj")]),
            ent(&[("name", "taj tandoori"), ("food", "indian"), ("area", "south"), ("pricerange", "expensive"), ("address", "64 cherry hinton road"), ("phone", "01223 412299"), ("postcode", "cb1 7aa")]),
            ent(&[("name", "royal spice"), ("food", "indian"), ("area", "north"), ("pricerange", "cheap"), ("address", "7 victoria avenue"), ("phone", "01733 553355"), ("postcode", "cb4 1eh")]),
            ent(&[("name", "cotto"), ("food", "british"), ("area", "centre"), ("pricerange", "moderate"), ("address", "183 east road"), ("phone", "01223 302010"), ("postcode", "cb1 1bg")]),
            ent(&[("name", "oak bistro"), ("food", "british"), ("area", "centre"), ("pricerange", "expensive"), ("address", "6 lensfield road"), ("phone", "01223 323361"), ("postcode", "cb2 1eg")]),
            ent(&[("name", "bangkok city"), ("food", "thai"), ("area", "centre"), ("pricerange", "expensive"), ("address", "24 green street"), ("phone", "01223 354382"), ("postcode", "cb2 3jx")]),
            ent(&[("name", "sala thong"), ("food", "thai"), ("area", "west"), ("pricerange", "expensive"), ("address", "35 newnham road"), ("phone", "01223 323178"), ("postcode", "cb3 9ey")]),
        ],
    );
    db.insert_domain(
        "hotel",
        vec![
            ent(&[("name", "gonville hotel"), ("stars", "3"), ("area", "centre"), ("pricerange", "expensive"), ("address", "gonville place"), ("phone", "01223 366611"), ("postcode", "cb1 1ly")]),
            ent(&[("name", "cityroomz"), ("stars", "0"), ("area", "centre"), ("pricerange", "moderate"), ("address", "sleeperz station road"), ("phone", "01223 304050"), ("postcode", "cb1 2tz")]),
            ent(&[("name", "arbury lodge"), ("stars", "4"), ("area", "north"), ("pricerange", "moderate"), ("address", "82 arbury road"), ("phone", "01223 364319"), ("postcode", "cb4 2je")]),
            ent(&[("name", "acorn guest house"), ("stars", "4"), ("area", "north"), ("pricerange", "moderate"), ("address", "154 chesterton road"), ("phone", "01223 353888"), ("postcode", "cb4 1da")]),
            ent(&[("name", "leverton house"), ("stars", "4"), ("area", "east"), ("pricerange", "cheap"), ("address", "732 newmarket road"), ("phone", "01223 292094"), ("postcode", "cb5 8rs")]),
            ent(&[("name", "huntingdon marriott"), ("stars", "4"), ("area", "west"), ("pricerange", "expensive"), ("address", "kingfisher way"), ("phone", "01480 446000"), ("postcode", "pe29 6fl")]),
            ent(&[("name", "lensfield hotel"), ("stars", "3"), ("area", "south"), ("pricerange", "expensive"), ("address", "53 lensfield road"), ("phone", "01223 355017"), ("postcode", "cb2 1en")]),
            ent(&[("name", "alpha milton"), ("stars", "3"), ("area", "north"), ("pricerange", "moderate"), ("address", "63 milton road"), ("phone", "01223 311625"), ("postcode", "cb4 1xa")]),
        ],
    );
    db.insert_domain(
        "train",
        vec![
            ent(&[("id", "tr1992"), ("departure", "cambridge"), ("destination", "london"), ("day", "monday"), ("leave", "09:00"), ("arrive", "09:51"), ("price", "23.60 pounds")]),
            ent(&[("id", "tr2045"), ("departure", "cambridge"), ("destination", "london"), ("day", "friday"), ("leave", "11:00"), ("arrive", "11:51"), ("price", "23.60 pounds")]),
            ent(&[("id", "tr3371"), ("departure", "cambridge"), ("destination", "norwich"), ("day", "saturday"), ("leave", "10:36"), ("arrive", "11:55"), ("price", "14.08 pounds")]),
            ent(&[("id", "tr4016"), ("departure", "cambridge"), ("destination", "norwich"), ("day", "saturday"), ("leave", "14:36"), ("arrive", "15:55"), ("price", "14.08 pounds")]),
            ent(&[("id", "tr5219"), ("departure", "london"), ("destination", "cambridge"), ("day", "sunday"), ("leave", "08:39"), ("arrive", "09:27"), ("price", "18.88 pounds")]),
            ent(&[("id", "tr5511"), ("departure", "london"), ("destination", "cambridge"), ("day", "tuesday"), ("leave", "13:39"), ("arrive", "14:27"), ("price", "23.60 pounds")]),
            ent(&[("id", "tr6034"), ("departure", "ely"), ("destination", "cambridge"), ("day", "wednesday"), ("leave", "07:35"), ("arrive", "07:52"), ("price", "4.40 pounds")]),
            ent(&[("id", "tr7075"), ("departure", "cambridge"), ("destination", "ely"), ("day", "thursday"), ("leave", "15:50"), ("arrive", "16:07"), ("price", "4.40 pounds")]),
            ent(&[("id", "tr7786"), ("departure", "cambridge"), ("destination", "stansted airport"), ("day", "friday"), ("leave", "12:40"), ("arrive", "13:08"), ("price", "10.10 pounds")]),
            ent(&[("id", "tr8026"), ("departure", "cambridge"), ("destination", "stansted airport"), ("day", "monday"), ("leave", "17:40"), ("arrive", "18:08"), ("price", "10.10 pounds")]),
            ent(&[("id", "tr8585"), ("departure", "peterborough"), ("destination", "cambridge"), ("day", "saturday"), ("leave", "12:19"), ("arrive", "13:09"), ("price", "16.50 pounds")]),
            ent(&[("id", "tr9063"), ("departure", "cambridge"), ("destination", "peterborough"), ("day", "sunday"), ("leave", "19:06"), ("arrive", "19:56"), ("price", "16.50 pounds")]),
        ],
    );
    db
}

/// A fixed three-turn attraction session used across unit tests.
pub fn sample_session() -> DialogSession {
    let db = fixture_db();
    let mut goal = Goal::default();
    goal.domains.insert(
        "attraction".into(),
        DomainGoal {
            informable: [("type", "theatre"), ("area", "centre")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            requestable: vec!["address".into(), "phone".into()],
        },
    );

    let mut state = DialogState::new();
    state.insert("attraction", "type", "theatre");
    state.insert("attraction", "area", "centre");
    let count = query(&db, &state, "attraction").unwrap();

    let mut acts0 = ActionState::default();
    acts0.push("attraction", "inform", &["choice"]);
    acts0.push("attraction", "recommend", &["name"]);
    let mut acts1 = ActionState::default();
    acts1.push("attraction", "inform", &["address", "phone"]);
    acts1.push("general", "reqmore", &[]);
    let mut acts2 = ActionState::default();
    acts2.push("general", "bye", &[]);

    DialogSession {
        session_id: "sample-0001".into(),
        goal,
        turns: vec![
            DialogTurn {
                turn_index: 0,
                user_utterance: "can you find a theatre in the centre of town ?".into(),
                dialog_state: state.clone(),
                db_count: count,
                action_state: acts0,
                response: "there are [value_choice] theatres . i recommend [value_name] .".into(),
            },
            DialogTurn {
                turn_index: 1,
                user_utterance: "what is the address and phone number ?".into(),
                dialog_state: state.clone(),
                db_count: count,
                action_state: acts1,
                response: "the address is [value_address] and the phone is [value_phone] . anything else ?".into(),
            },
            DialogTurn {
                turn_index: 2,
                user_utterance: "that is all , thank you .".into(),
                dialog_state: state,
                db_count: count,
                action_state: acts2,
                response: "you are welcome . goodbye .".into(),
            },
        ],
    }
}

/// The overfit fixture: one three-turn session whose state values all occur
/// verbatim in the user utterances, so attention on a memorizing model has
/// something to copy from.
pub fn overfit_session() -> DialogSession {
    let db = fixture_db();
    let mut goal = Goal::default();
    goal.domains.insert(
        "attraction".into(),
        DomainGoal {
            informable: [("type", "theatre"), ("area", "centre")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            requestable: vec!["address".into(), "phone".into()],
        },
    );
    goal.domains.insert(
        "train".into(),
        DomainGoal {
            informable: [("destination", "norwich"), ("day", "saturday")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            requestable: vec!["leave".into()],
        },
    );

    let mut state0 = DialogState::new();
    state0.insert("attraction", "type", "theatre");
    state0.insert("attraction", "area", "centre");
    let count0 = query(&db, &state0, "attraction").unwrap();

    let mut state2 = state0.clone();
    state2.insert("train", "destination", "norwich");
    state2.insert("train", "day", "saturday");
    let count2 = query(&db, &state2, "train").unwrap();

    let mut acts0 = ActionState::default();
    acts0.push("attraction", "inform", &["choice"]);
    acts0.push("attraction", "recommend", &["name"]);
    let mut acts1 = ActionState::default();
    acts1.push("attraction", "inform", &["address", "phone"]);
    acts1.push("general", "reqmore", &[]);
    let mut acts2 = ActionState::default();
    acts2.push("train", "inform", &["id", "leave"]);
    acts2.push("train", "offerbook", &[]);

    DialogSession {
        session_id: "overfit-0001".into(),
        goal,
        turns: vec![
            DialogTurn {
                turn_index: 0,
                user_utterance: "can you find a theatre in the centre of town ?".into(),
                dialog_state: state0.clone(),
                db_count: count0,
                action_state: acts0,
                response: "there are [value_choice] theatres . i recommend [value_name] .".into(),
            },
            DialogTurn {
                turn_index: 1,
                user_utterance: "what is the address and phone number ?".into(),
                dialog_state: state0,
                db_count: count0,
                action_state: acts1,
                response: "the address is [value_address] and the phone is [value_phone] . anything else ?".into(),
            },
            DialogTurn {
                turn_index: 2,
                user_utterance: "i also need a train to norwich on saturday .".into(),
                dialog_state: state2,
                db_count: count2,
                action_state: acts2,
                response: "[value_id] leaves at [value_leave] . shall i book it ?".into(),
            },
        ],
    }
}

struct Scenario<'a> {
    domain: &'a str,
    entity: &'a Entity,
    informable: Vec<(&'a str, &'a str)>,
    requestable: Vec<String>,
    book_reference: bool,
    split_inform: bool,
}

/// Generate `n` synthetic sessions deterministically from a seed. Ids are
/// `{prefix}-{i:04}`.
pub fn generate_sessions(seed: u64, n: usize, prefix: &str) -> Vec<DialogSession> {
    let db = fixture_db();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| generate_session(&db, &mut rng, &format!("{prefix}-{i:04}")))
        .collect()
}

fn generate_session(db: &EntityDb, rng: &mut ChaCha8Rng, session_id: &str) -> DialogSession {
    let task_domains = ["attraction", "restaurant", "hotel", "train"];
    let n_domains = if rng.random_bool(0.35) { 2 } else { 1 };
    let mut chosen: Vec<&str> = Vec::new();
    while chosen.len() < n_domains {
        let d = task_domains[rng.random_range(0..task_domains.len())];
        if !chosen.contains(&d) {
            chosen.push(d);
        }
    }

    let mut goal = Goal::default();
    let mut scenarios: Vec<Scenario> = Vec::new();
    for (di, domain) in chosen.iter().enumerate() {
        let entities = db.entities(domain).expect("fixture domain");
        let entity = &entities[rng.random_range(0..entities.len())];
        let informable_slots: Vec<&str> = match *domain {
            "attraction" => vec!["type", "area"],
            "restaurant" => {
                if rng.random_bool(0.5) {
                    vec!["food", "area", "pricerange"]
                } else {
                    vec!["food", "area"]
                }
            }
            "hotel" => {
                if rng.random_bool(0.5) {
                    vec!["stars", "area", "pricerange"]
                } else {
                    vec!["stars", "area"]
                }
            }
            "train" => {
                if rng.random_bool(0.5) {
                    vec!["departure", "destination", "day"]
                } else {
                    vec!["destination", "day"]
                }
            }
            _ => unreachable!(),
        };
        let informable: Vec<(&str, &str)> = informable_slots
            .iter()
            .map(|s| (*s, entity.get(*s).expect("entity has slot").as_str()))
            .collect();
        let req_pool: &[&str] = match *domain {
            "attraction" => &["address", "phone", "postcode", "price"],
            "restaurant" | "hotel" => &["address", "phone", "postcode"],
            "train" => &["price", "arrive"],
            _ => unreachable!(),
        };
        let n_req = 1 + usize::from(rng.random_bool(0.5));
        let mut requestable: Vec<String> = Vec::new();
        while requestable.len() < n_req {
            let r = req_pool[rng.random_range(0..req_pool.len())];
            if !requestable.iter().any(|x| x == r) {
                requestable.push(r.to_string());
            }
        }
        let book_reference =
            matches!(*domain, "restaurant" | "hotel" | "train") && rng.random_bool(0.4);
        if book_reference {
            requestable.push("reference".to_string());
        }
        goal.domains.insert(
            domain.to_string(),
            DomainGoal {
                informable: informable
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
                requestable: requestable.clone(),
            },
        );
        scenarios.push(Scenario {
            domain,
            entity,
            informable,
            requestable,
            book_reference,
            split_inform: di == 0 && rng.random_bool(0.35),
        });
    }

    let mut turns: Vec<DialogTurn> = Vec::new();
    let mut state = DialogState::new();
    for sc in &scenarios {
        push_domain_turns(db, rng, sc, &mut state, &mut turns);
    }
    // Closing turn.
    let closings = [
        "that is all , thank you .",
        "no that is everything , thanks .",
        "great , that is all i need today .",
    ];
    let mut bye = ActionState::default();
    bye.push("general", "bye", &[]);
    let last_count = turns.last().map(|t| t.db_count).unwrap_or(0);
    turns.push(DialogTurn {
        turn_index: 0,
        user_utterance: closings[rng.random_range(0..closings.len())].into(),
        dialog_state: state.clone(),
        db_count: last_count,
        action_state: bye,
        response: "you are welcome . goodbye .".into(),
    });
    for (i, turn) in turns.iter_mut().enumerate() {
        turn.turn_index = i;
    }
    DialogSession {
        session_id: session_id.to_string(),
        goal,
        turns,
    }
}

fn push_domain_turns(
    db: &EntityDb,
    rng: &mut ChaCha8Rng,
    sc: &Scenario,
    state: &mut DialogState,
    turns: &mut Vec<DialogTurn>,
) {
    let domain = sc.domain;

    // Optionally inform the first constraint alone; the system asks for more.
    let mut remaining: Vec<(&str, &str)> = sc.informable.clone();
    if sc.split_inform && remaining.len() > 1 {
        let (slot, value) = remaining.remove(0);
        state.insert(domain, slot, value);
        let count = query(db, state, domain).expect("fixture domain");
        let next_slot = remaining[0].0;
        let mut acts = ActionState::default();
        acts.push(domain, "request", &[next_slot]);
        turns.push(DialogTurn {
            turn_index: 0,
            user_utterance: partial_inform_utterance(rng, domain, slot, value),
            dialog_state: state.clone(),
            db_count: count,
            action_state: acts,
            response: format!("sure , do you have a preferred {next_slot} ?"),
        });
        for (slot, value) in &remaining {
            state.insert(domain, slot, value);
        }
    } else {
        for (slot, value) in &remaining {
            state.insert(domain, slot, value);
        }
    }

    // Recommend an entity under the full constraint set.
    let count = query(db, state, domain).expect("fixture domain");
    let mut acts = ActionState::default();
    let response = if domain == "train" {
        if count > 1 {
            acts.push(domain, "inform", &["choice", "id", "leave"]);
            "there are [value_choice] trains . [value_id] leaves at [value_leave] .".to_string()
        } else {
            acts.push(domain, "inform", &["id", "leave"]);
            "[value_id] leaves at [value_leave] .".to_string()
        }
    } else if count > 1 {
        acts.push(domain, "inform", &["choice"]);
        acts.push(domain, "recommend", &["name"]);
        "there are [value_choice] options . i recommend [value_name] .".to_string()
    } else {
        acts.push(domain, "recommend", &["name"]);
        "i recommend [value_name] .".to_string()
    };
    turns.push(DialogTurn {
        turn_index: 0,
        user_utterance: full_inform_utterance(rng, sc, state),
        dialog_state: state.clone(),
        db_count: count,
        action_state: acts,
        response,
    });

    // Answer the requestable slots (reference is handled by the booking turn).
    let asked: Vec<&str> = sc
        .requestable
        .iter()
        .filter(|r| r.as_str() != "reference")
        .map(|r| r.as_str())
        .collect();
    if !asked.is_empty() {
        let mut acts = ActionState::default();
        acts.push(domain, "inform", &asked);
        acts.push("general", "reqmore", &[]);
        let user = match asked.len() {
            1 => format!("what is the {} ?", asked[0]),
            _ => format!("can i get the {} and the {} ?", asked[0], asked[1]),
        };
        let mut parts: Vec<String> = asked
            .iter()
            .map(|r| format!("the {r} is [value_{r}]"))
            .collect();
        let response = format!("{} . anything else ?", parts.join(" and "));
        parts.clear();
        turns.push(DialogTurn {
            turn_index: 0,
            user_utterance: user,
            dialog_state: state.clone(),
            db_count: count,
            action_state: acts,
            response,
        });
    }

    if sc.book_reference {
        let mut acts = ActionState::default();
        acts.push(domain, "offerbooked", &["reference"]);
        let people = rng.random_range(1..=6);
        let user = match domain {
            "train" => format!("please book {people} tickets ."),
            _ => format!("please book it for {people} people ."),
        };
        turns.push(DialogTurn {
            turn_index: 0,
            user_utterance: user,
            dialog_state: state.clone(),
            db_count: count,
            action_state: acts,
            response: "booking was successful . your reference number is [value_reference] ."
                .into(),
        });
    }
    let _ = sc.entity;
}

fn partial_inform_utterance(rng: &mut ChaCha8Rng, domain: &str, slot: &str, value: &str) -> String {
    let openers = ["i am looking for", "can you help me find", "i need"];
    let opener = openers[rng.random_range(0..openers.len())];
    match (domain, slot) {
        ("attraction", "type") => format!("{opener} a {value} to visit ."),
        ("restaurant", "food") => format!("{opener} a {value} restaurant ."),
        ("hotel", "stars") => format!("{opener} a {value} star hotel ."),
        ("train", _) => format!("{opener} a train to {value} ."),
        _ => format!("{opener} something with {slot} {value} ."),
    }
}

fn full_inform_utterance(rng: &mut ChaCha8Rng, sc: &Scenario, state: &DialogState) -> String {
    let slots = state.slots(sc.domain).expect("domain informed");
    let get = |slot: &str| slots.get(slot).map(String::as_str).unwrap_or("");
    let openers = ["i am looking for", "i want", "i need"];
    let opener = openers[rng.random_range(0..openers.len())];
    match sc.domain {
        "attraction" => {
            if sc.split_inform {
                format!("somewhere in the {} please .", get("area"))
            } else {
                format!("{opener} a {} in the {} .", get("type"), get("area"))
            }
        }
        "restaurant" => {
            let price = slots
                .get("pricerange")
                .map(|p| format!("{p} "))
                .unwrap_or_default();
            if sc.split_inform {
                format!("{}in the {} please .", price, get("area"))
            } else {
                format!(
                    "{opener} a {}{} restaurant in the {} .",
                    price,
                    get("food"),
                    get("area")
                )
            }
        }
        "hotel" => {
            let price = slots
                .get("pricerange")
                .map(|p| format!(" in the {p} price range"))
                .unwrap_or_default();
            if sc.split_inform {
                format!("in the {}{} please .", get("area"), price)
            } else {
                format!(
                    "{opener} a {} star hotel in the {}{} .",
                    get("stars"),
                    get("area"),
                    price
                )
            }
        }
        "train" => {
            let from = slots
                .get("departure")
                .map(|d| format!(" from {d}"))
                .unwrap_or_default();
            if sc.split_inform {
                format!("it should leave on {} please .", get("day"))
            } else {
                format!(
                    "{opener} a train{} to {} on {} .",
                    from,
                    get("destination"),
                    get("day")
                )
            }
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_sessions_validate() {
        let schema = fixture_schema();
        for session in generate_sessions(13, 40, "gen") {
            session.validate(&schema).unwrap();
            assert!(!session.turns.is_empty());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_sessions(21, 10, "g");
        let b = generate_sessions(21, 10, "g");
        assert_eq!(a, b);
        let c = generate_sessions(22, 10, "g");
        assert_ne!(a, c);
    }

    #[test]
    fn crafted_sessions_validate() {
        let schema = fixture_schema();
        sample_session().validate(&schema).unwrap();
        overfit_session().validate(&schema).unwrap();
    }

    #[test]
    fn overfit_session_db_counts_match_requery() {
        let db = fixture_db();
        let s = overfit_session();
        assert_eq!(s.turns[0].db_count, 3);
        assert_eq!(
            s.turns[2].db_count,
            query(&db, &s.turns[2].dialog_state, "train").unwrap()
        );
    }
}
