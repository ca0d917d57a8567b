//! Scene model: object classes and their affordance attributes, the location
//! graph used for navigation costs, and procedural scene construction.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loc{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjectCategory {
    Appliance,
    Tableware,
    Cloth,
    Plain,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Persistence {
    Temporary,
    Persistent,
}

/// The three ways an object can be unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AffordanceCategory {
    Occupied,
    Used,
    Dirty,
}

impl AffordanceCategory {
    pub fn persistence(self) -> Persistence {
        match self {
            AffordanceCategory::Occupied => Persistence::Temporary,
            AffordanceCategory::Used | AffordanceCategory::Dirty => Persistence::Persistent,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AffordanceCategory::Occupied => "Occupied",
            AffordanceCategory::Used => "Used",
            AffordanceCategory::Dirty => "Dirty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Occupied" => Some(AffordanceCategory::Occupied),
            "Used" => Some(AffordanceCategory::Used),
            "Dirty" => Some(AffordanceCategory::Dirty),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    Microwave,
    Fridge,
    Mug,
    Cup,
    Bowl,
    Plate,
    Pot,
    Pan,
    Cloth,
    Egg,
    Apple,
    Potato,
    Tomato,
    Bread,
    SoapBar,
    Candle,
    CounterTop,
    Cabinet,
    Drawer,
    Shelf,
    DiningTable,
}

/// Static description of a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectClass {
    pub name: &'static str,
    pub category: ObjectCategory,
    pub dynamic: bool,
    pub applicable_categories: Vec<AffordanceCategory>,
}

impl ClassKind {
    pub const ALL: [ClassKind; 21] = [
        ClassKind::Microwave,
        ClassKind::Fridge,
        ClassKind::Mug,
        ClassKind::Cup,
        ClassKind::Bowl,
        ClassKind::Plate,
        ClassKind::Pot,
        ClassKind::Pan,
        ClassKind::Cloth,
        ClassKind::Egg,
        ClassKind::Apple,
        ClassKind::Potato,
        ClassKind::Tomato,
        ClassKind::Bread,
        ClassKind::SoapBar,
        ClassKind::Candle,
        ClassKind::CounterTop,
        ClassKind::Cabinet,
        ClassKind::Drawer,
        ClassKind::Shelf,
        ClassKind::DiningTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassKind::Microwave => "Microwave",
            ClassKind::Fridge => "Fridge",
            ClassKind::Mug => "Mug",
            ClassKind::Cup => "Cup",
            ClassKind::Bowl => "Bowl",
            ClassKind::Plate => "Plate",
            ClassKind::Pot => "Pot",
            ClassKind::Pan => "Pan",
            ClassKind::Cloth => "Cloth",
            ClassKind::Egg => "Egg",
            ClassKind::Apple => "Apple",
            ClassKind::Potato => "Potato",
            ClassKind::Tomato => "Tomato",
            ClassKind::Bread => "Bread",
            ClassKind::SoapBar => "SoapBar",
            ClassKind::Candle => "Candle",
            ClassKind::CounterTop => "CounterTop",
            ClassKind::Cabinet => "Cabinet",
            ClassKind::Drawer => "Drawer",
            ClassKind::Shelf => "Shelf",
            ClassKind::DiningTable => "DiningTable",
        }
    }

    pub fn from_name(name: &str) -> Option<ClassKind> {
        ClassKind::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// Lower-case words used in instructions ("soap bar", "dining table").
    pub fn display_name(self) -> &'static str {
        match self {
            ClassKind::Microwave => "microwave",
            ClassKind::Fridge => "fridge",
            ClassKind::Mug => "mug",
            ClassKind::Cup => "cup",
            ClassKind::Bowl => "bowl",
            ClassKind::Plate => "plate",
            ClassKind::Pot => "pot",
            ClassKind::Pan => "pan",
            ClassKind::Cloth => "cloth",
            ClassKind::Egg => "egg",
            ClassKind::Apple => "apple",
            ClassKind::Potato => "potato",
            ClassKind::Tomato => "tomato",
            ClassKind::Bread => "bread",
            ClassKind::SoapBar => "soap bar",
            ClassKind::Candle => "candle",
            ClassKind::CounterTop => "countertop",
            ClassKind::Cabinet => "cabinet",
            ClassKind::Drawer => "drawer",
            ClassKind::Shelf => "shelf",
            ClassKind::DiningTable => "dining table",
        }
    }

    pub fn category(self) -> ObjectCategory {
        use ClassKind::*;
        match self {
            Microwave | Fridge => ObjectCategory::Appliance,
            Mug | Cup | Bowl | Plate | Pot | Pan => ObjectCategory::Tableware,
            Cloth => ObjectCategory::Cloth,
            Egg | Apple | Potato | Tomato | Bread | SoapBar | Candle => ObjectCategory::Plain,
            CounterTop | Cabinet | Drawer | Shelf | DiningTable => ObjectCategory::Surface,
        }
    }

    pub fn applicable_categories(self) -> Vec<AffordanceCategory> {
        match self.category() {
            ObjectCategory::Appliance => vec![AffordanceCategory::Occupied],
            ObjectCategory::Tableware => vec![AffordanceCategory::Used, AffordanceCategory::Dirty],
            ObjectCategory::Cloth => vec![AffordanceCategory::Dirty],
            ObjectCategory::Plain | ObjectCategory::Surface => Vec::new(),
        }
    }

    pub fn is_dynamic(self) -> bool {
        !self.applicable_categories().is_empty()
    }

    pub fn class(self) -> ObjectClass {
        ObjectClass {
            name: self.name(),
            category: self.category(),
            dynamic: self.is_dynamic(),
            applicable_categories: self.applicable_categories(),
        }
    }

    /// Fixed receptacles never move; everything else can be carried.
    pub fn is_fixed(self) -> bool {
        matches!(self.category(), ObjectCategory::Appliance | ObjectCategory::Surface)
    }

    pub fn is_movable(self) -> bool {
        !self.is_fixed()
    }

    pub fn is_openable(self) -> bool {
        matches!(self, ClassKind::Microwave | ClassKind::Fridge | ClassKind::Cabinet | ClassKind::Drawer)
    }

    pub fn is_toggleable(self) -> bool {
        self == ClassKind::Microwave
    }

    /// Movable containers other objects can be stacked into.
    pub fn is_receptacle_object(self) -> bool {
        matches!(self, ClassKind::Plate | ClassKind::Bowl | ClassKind::Pot | ClassKind::Pan)
    }

    /// Fixed receptacles that objects start on or inside.
    pub fn is_placement_surface(self) -> bool {
        self.category() == ObjectCategory::Surface
    }

    pub fn is_cleanable(self) -> bool {
        matches!(self.category(), ObjectCategory::Tableware | ObjectCategory::Cloth)
    }

    pub fn is_heatable(self) -> bool {
        use ClassKind::*;
        matches!(self, Egg | Apple | Potato | Tomato | Bread | Mug | Cup)
    }

    pub fn is_coolable(self) -> bool {
        use ClassKind::*;
        matches!(self, Egg | Apple | Potato | Tomato | Bread | Mug | Cup)
    }

    pub fn is_heater(self) -> bool {
        self == ClassKind::Microwave
    }

    pub fn is_cooler(self) -> bool {
        self == ClassKind::Fridge
    }

    /// Indefinite article for instruction templates.
    pub fn article(self) -> &'static str {
        match self.display_name().chars().next() {
            Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
            _ => "a",
        }
    }

    /// Reference descriptions of the available and unavailable appearance.
    pub fn reference_descriptions(self) -> (String, String) {
        let n = self.display_name();
        match self.category() {
            ObjectCategory::Appliance => {
                (format!("an idle {n} with its door free to open"), format!("a running {n} that is currently in use"))
            }
            ObjectCategory::Tableware => (format!("a clean, empty {n}"), format!("a {n} with food residue or stains")),
            ObjectCategory::Cloth => (format!("a clean, folded {n}"), format!("a stained, dirty {n}")),
            _ => (format!("a {n}"), format!("a {n}")),
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub name: String,
    pub class: ClassKind,
    pub location: LocationId,
    pub inside: Option<ObjectId>,
    pub open: bool,
    pub clean: bool,
    pub used: bool,
    /// Remaining occupancy, in simulator steps from episode start.
    pub busy_remaining: u32,
    pub heated: bool,
    pub cooled: bool,
    pub on: bool,
}

impl ObjectInstance {
    fn pristine(id: ObjectId, name: String, class: ClassKind, location: LocationId) -> Self {
        ObjectInstance {
            id,
            name,
            class,
            location,
            inside: None,
            open: false,
            clean: true,
            used: false,
            busy_remaining: 0,
            heated: false,
            cooled: false,
            on: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocationNode {
    pub id: LocationId,
    pub sink: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: LocationId,
    pub b: LocationId,
    pub cost: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocationGraph {
    pub nodes: Vec<LocationNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("size error: {0}")]
    Size(String),
    #[error("location {0} not found")]
    NodeNotFound(LocationId),
    #[error("no path between {0} and {1}")]
    Disconnected(LocationId, LocationId),
}

impl LocationGraph {
    pub fn contains(&self, id: LocationId) -> bool {
        self.nodes.iter().any(|n| n.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    fn neighbours(&self, id: LocationId) -> impl Iterator<Item = (LocationId, u32)> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.a == id {
                Some((e.b, e.cost))
            } else if e.b == id {
                Some((e.a, e.cost))
            } else {
                None
            }
        })
    }

    /// Dijkstra distances from `source` to every reachable node.
    pub fn distances_from(&self, source: LocationId) -> Result<BTreeMap<LocationId, u32>, WorldError> {
        if !self.contains(source) {
            return Err(WorldError::NodeNotFound(source));
        }
        let mut dist: BTreeMap<LocationId, u32> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u32, source)));
        while let Some(Reverse((d, node))) = heap.pop() {
            if dist.contains_key(&node) {
                continue;
            }
            dist.insert(node, d);
            for (next, cost) in self.neighbours(node) {
                if !dist.contains_key(&next) {
                    heap.push(Reverse((d + cost, next)));
                }
            }
        }
        Ok(dist)
    }

    pub fn is_connected(&self) -> bool {
        match self.nodes.first() {
            None => false,
            Some(first) => self.distances_from(first.id).map(|d| d.len() == self.nodes.len()).unwrap_or(false),
        }
    }
}

/// Minimal total edge cost between two locations.
pub fn shortest_path(graph: &LocationGraph, a: LocationId, b: LocationId) -> Result<u32, WorldError> {
    if !graph.contains(b) {
        return Err(WorldError::NodeNotFound(b));
    }
    graph.distances_from(a)?.get(&b).copied().ok_or(WorldError::Disconnected(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoomType {
    Kitchen,
    Bathroom,
}

impl RoomType {
    pub fn as_str(self) -> &'static str {
        match self {
            RoomType::Kitchen => "kitchen",
            RoomType::Bathroom => "bathroom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeParams {
    pub n_locations: u32,
    pub objects: BTreeMap<ClassKind, u32>,
}

impl SizeParams {
    pub fn default_for(room: RoomType) -> Self {
        use ClassKind::*;
        let objects: &[(ClassKind, u32)] = match room {
            RoomType::Kitchen => &[
                (CounterTop, 1),
                (Cabinet, 2),
                (Drawer, 1),
                (DiningTable, 1),
                (Microwave, 1),
                (Fridge, 1),
                (Mug, 1),
                (Cup, 1),
                (Bowl, 1),
                (Plate, 1),
                (Pot, 1),
                (Pan, 1),
                (Cloth, 1),
                (Egg, 1),
                (Apple, 2),
                (Potato, 1),
                (Tomato, 1),
            ],
            RoomType::Bathroom => &[
                (CounterTop, 1),
                (Cabinet, 2),
                (Drawer, 1),
                (Shelf, 1),
                (Cloth, 2),
                (SoapBar, 2),
                (Cup, 1),
                (Candle, 1),
            ],
        };
        SizeParams {
            n_locations: match room {
                RoomType::Kitchen => 6,
                RoomType::Bathroom => 5,
            },
            objects: objects.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub room_type: RoomType,
    pub graph: LocationGraph,
    pub objects: BTreeMap<ObjectId, ObjectInstance>,
    pub sink_location: LocationId,
    pub agent_start: LocationId,
    pub seed: u64,
}

impl Scene {
    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.get(&id)
    }

    pub fn by_name(&self, name: &str) -> Option<&ObjectInstance> {
        self.objects.values().find(|o| o.name == name)
    }

    pub fn instances_of(&self, class: ClassKind) -> impl Iterator<Item = &ObjectInstance> + '_ {
        self.objects.values().filter(move |o| o.class == class)
    }

    pub fn count_of(&self, class: ClassKind) -> usize {
        self.instances_of(class).count()
    }

    pub fn classes(&self) -> BTreeSet<ClassKind> {
        self.objects.values().map(|o| o.class).collect()
    }

    /// Canonical JSON encoding (struct field order, sorted maps).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization")
    }
}

/// Builds a scene deterministically from its arguments.
pub fn build_scene(seed: u64, room_type: RoomType, size: &SizeParams) -> Result<Scene, WorldError> {
    if size.n_locations < 3 {
        return Err(WorldError::Size(format!("need at least 3 locations, got {}", size.n_locations)));
    }
    let room_salt = match room_type {
        RoomType::Kitchen => 0x6b69_7463_6865_6e00,
        RoomType::Bathroom => 0x6261_7468_726f_6f6d,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ room_salt);
    let n = size.n_locations;

    let nodes_ids: Vec<LocationId> = (0..n).map(LocationId).collect();
    let mut edges = Vec::new();
    let mut present = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.push(Edge { a: LocationId(j), b: LocationId(i), cost: rng.gen_range(1..=3) });
        present.insert((j, i));
    }
    for _ in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            edges.push(Edge { a: LocationId(key.0), b: LocationId(key.1), cost: rng.gen_range(1..=3) });
        }
    }
    let sink_location = LocationId(rng.gen_range(0..n));
    let agent_start = LocationId(rng.gen_range(0..n));
    let graph = LocationGraph {
        nodes: nodes_ids.iter().map(|&id| LocationNode { id, sink: id == sink_location }).collect(),
        edges,
    };

    let mut objects = BTreeMap::new();
    let mut next_id = 1u32;
    let mut per_class: BTreeMap<ClassKind, u32> = BTreeMap::new();
    let mut name_for = |class: ClassKind| {
        let k = per_class.entry(class).or_insert(0);
        *k += 1;
        format!("{}{}", class.name().to_lowercase(), k)
    };

    for (&class, &count) in size.objects.iter().filter(|(c, _)| c.is_fixed()) {
        for _ in 0..count {
            let loc = *nodes_ids.choose(&mut rng).expect("nonempty");
            let id = ObjectId(next_id);
            next_id += 1;
            objects.insert(id, ObjectInstance::pristine(id, name_for(class), class, loc));
        }
    }
    let hosts: Vec<(ObjectId, LocationId)> =
        objects.values().filter(|o| o.class.is_placement_surface()).map(|o| (o.id, o.location)).collect();
    for (&class, &count) in size.objects.iter().filter(|(c, _)| c.is_movable()) {
        for _ in 0..count {
            let id = ObjectId(next_id);
            next_id += 1;
            let (loc, inside) = match hosts.choose(&mut rng) {
                Some(&(host, loc)) => (loc, Some(host)),
                None => (*nodes_ids.choose(&mut rng).expect("nonempty"), None),
            };
            let mut inst = ObjectInstance::pristine(id, name_for(class), class, loc);
            inst.inside = inside;
            objects.insert(id, inst);
        }
    }

    Ok(Scene {
        id: format!("{}-{}", room_type.as_str(), seed),
        room_type,
        graph,
        objects,
        sink_location,
        agent_start,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneViolation(pub String);

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Returns every violated scene invariant; an empty list means the scene is well formed.
pub fn validate_scene(scene: &Scene) -> Vec<SceneViolation> {
    let mut out = Vec::new();
    let mut v = |msg: String| out.push(SceneViolation(msg));
    let graph = &scene.graph;

    let ids: BTreeSet<LocationId> = graph.ids().collect();
    if ids.len() != graph.nodes.len() {
        v("duplicate location ids".into());
    }
    if graph.nodes.is_empty() {
        v("location graph has no nodes".into());
    }
    for e in &graph.edges {
        if !ids.contains(&e.a) || !ids.contains(&e.b) {
            v(format!("edge {}-{}: location not in graph", e.a, e.b));
        }
        if e.cost < 1 {
            v(format!("edge {}-{}: step cost must be >= 1", e.a, e.b));
        }
    }
    if !graph.nodes.is_empty() && !graph.is_connected() {
        v("location graph is not connected".into());
    }
    let sinks: Vec<LocationId> = graph.nodes.iter().filter(|n| n.sink).map(|n| n.id).collect();
    if sinks.len() != 1 {
        v(format!("exactly one sink required, found {}", sinks.len()));
    } else if sinks[0] != scene.sink_location {
        v(format!("sink_location {} does not match sink node {}", scene.sink_location, sinks[0]));
    }
    if !ids.contains(&scene.sink_location) {
        v(format!("sink {}: location not in graph", scene.sink_location));
    }
    if !ids.contains(&scene.agent_start) {
        v(format!("agent start {}: location not in graph", scene.agent_start));
    }

    let mut names = BTreeSet::new();
    for (key, o) in &scene.objects {
        if *key != o.id {
            v(format!("object {}: map key {} does not match id", o.name, key));
        }
        if !names.insert(o.name.as_str()) {
            v(format!("object {}: duplicate name", o.name));
        }
        if !ids.contains(&o.location) {
            v(format!("object {} at {}: location not in graph", o.name, o.location));
        }
        if o.busy_remaining > 0 && o.class.category() != ObjectCategory::Appliance {
            v(format!("object {}: busy_remaining set on non-appliance", o.name));
        }
        if o.open && !o.class.is_openable() {
            v(format!("object {}: open set on non-openable class", o.name));
        }
        if o.on && !o.class.is_toggleable() {
            v(format!("object {}: on set on non-toggleable class", o.name));
        }
        if let Some(host) = o.inside {
            if host == o.id {
                v(format!("object {}: inside itself", o.name));
            } else if let Some(h) = scene.objects.get(&host) {
                if !(h.class.is_fixed() || h.class.is_receptacle_object()) {
                    v(format!("object {}: host {} is not a receptacle", o.name, h.name));
                }
                if h.location != o.location {
                    v(format!("object {}: location differs from host {}", o.name, h.name));
                }
            } else {
                v(format!("object {}: inside unknown object {}", o.name, host));
            }
        }
        if o.class.is_fixed() && o.inside.is_some() {
            v(format!("object {}: fixed receptacle cannot be inside another", o.name));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SizeParams {
        SizeParams {
            n_locations: 4,
            objects: [(ClassKind::Microwave, 1), (ClassKind::Pan, 1), (ClassKind::Egg, 1)].into_iter().collect(),
        }
    }

    #[test]
    fn small_scene_has_three_objects_and_connected_graph() {
        let s = build_scene(0, RoomType::Kitchen, &small()).unwrap();
        assert_eq!(s.objects.len(), 3);
        assert_eq!(s.graph.nodes.len(), 4);
        assert!(s.graph.is_connected());
        assert!(validate_scene(&s).is_empty(), "{:?}", validate_scene(&s));
        assert!(s.objects.values().all(|o| o.clean && !o.used && o.busy_remaining == 0));
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_scene(0, RoomType::Kitchen, &small()).unwrap();
        let b = build_scene(0, RoomType::Kitchen, &small()).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
    }

    #[test]
    fn too_few_locations_is_size_error() {
        let mut p = small();
        p.n_locations = 2;
        assert!(matches!(build_scene(0, RoomType::Kitchen, &p), Err(WorldError::Size(_))));
    }

    #[test]
    fn generated_corpus_validates() {
        for seed in 1..=100 {
            for room in [RoomType::Kitchen, RoomType::Bathroom] {
                let s = build_scene(seed, room, &SizeParams::default_for(room)).unwrap();
                assert!(validate_scene(&s).is_empty(), "seed {seed}: {:?}", validate_scene(&s));
            }
        }
    }

    #[test]
    fn unknown_location_reported() {
        let mut s = build_scene(3, RoomType::Kitchen, &small()).unwrap();
        s.objects.values_mut().next().unwrap().location = LocationId(99);
        let v = validate_scene(&s);
        assert!(v.iter().any(|x| x.0.contains("location not in graph")), "{v:?}");
    }

    #[test]
    fn two_sinks_reported() {
        let mut s = build_scene(3, RoomType::Kitchen, &small()).unwrap();
        for n in &mut s.graph.nodes {
            n.sink = true;
        }
        let v = validate_scene(&s);
        assert!(v.iter().any(|x| x.0.contains("exactly one sink")), "{v:?}");
    }

    fn line() -> LocationGraph {
        LocationGraph {
            nodes: (0..3).map(|i| LocationNode { id: LocationId(i), sink: i == 0 }).collect(),
            edges: vec![
                Edge { a: LocationId(0), b: LocationId(1), cost: 1 },
                Edge { a: LocationId(1), b: LocationId(2), cost: 1 },
            ],
        }
    }

    #[test]
    fn path_identity_and_line() {
        let g = line();
        assert_eq!(shortest_path(&g, LocationId(1), LocationId(1)).unwrap(), 0);
        assert_eq!(shortest_path(&g, LocationId(0), LocationId(2)).unwrap(), 2);
        assert_eq!(shortest_path(&g, LocationId(0), LocationId(7)), Err(WorldError::NodeNotFound(LocationId(7))));
    }

    /// Floyd-Warshall over an adjacency matrix.
    fn all_pairs(g: &LocationGraph) -> Vec<Vec<u64>> {
        let n = g.nodes.len();
        let inf = u64::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for e in &g.edges {
            let (a, b) = (e.a.0 as usize, e.b.0 as usize);
            d[a][b] = d[a][b].min(e.cost as u64);
            d[b][a] = d[b][a].min(e.cost as u64);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn dijkstra_matches_floyd_warshall_on_random_graphs() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 20u32;
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push(Edge { a: LocationId(rng.gen_range(0..i)), b: LocationId(i), cost: rng.gen_range(1..=9) });
            }
            for _ in 0..25 {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if a != b {
                    edges.push(Edge { a: LocationId(a), b: LocationId(b), cost: rng.gen_range(1..=9) });
                }
            }
            let g = LocationGraph {
                nodes: (0..n).map(|i| LocationNode { id: LocationId(i), sink: false }).collect(),
                edges,
            };
            let oracle = all_pairs(&g);
            for a in 0..n {
                for b in 0..n {
                    let got = shortest_path(&g, LocationId(a), LocationId(b)).unwrap() as u64;
                    assert_eq!(got, oracle[a as usize][b as usize]);
                }
            }
        }
    }

    #[test]
    fn class_invariants() {
        for c in ClassKind::ALL {
            let cls = c.class();
            assert_eq!(cls.dynamic, !cls.applicable_categories.is_empty());
            match cls.category {
                ObjectCategory::Appliance => assert_eq!(cls.applicable_categories, vec![AffordanceCategory::Occupied]),
                ObjectCategory::Tableware => {
                    assert_eq!(cls.applicable_categories, vec![AffordanceCategory::Used, AffordanceCategory::Dirty])
                }
                ObjectCategory::Cloth => assert_eq!(cls.applicable_categories, vec![AffordanceCategory::Dirty]),
                _ => assert!(cls.applicable_categories.is_empty()),
            }
            assert_eq!(ClassKind::from_name(c.name()), Some(c));
        }
        assert_eq!(AffordanceCategory::Occupied.persistence(), Persistence::Temporary);
        assert_eq!(AffordanceCategory::Used.persistence(), Persistence::Persistent);
        assert_eq!(AffordanceCategory::Dirty.persistence(), Persistence::Persistent);
    }

    proptest::proptest! {
        #[test]
        fn path_symmetric_and_triangle(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8u32;
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push(Edge { a: LocationId(rng.gen_range(0..i)), b: LocationId(i), cost: 1 });
            }
            let g = LocationGraph {
                nodes: (0..n).map(|i| LocationNode { id: LocationId(i), sink: false }).collect(),
                edges,
            };
            for a in 0..n { for b in 0..n {
                let ab = shortest_path(&g, LocationId(a), LocationId(b)).unwrap();
                proptest::prop_assert_eq!(ab, shortest_path(&g, LocationId(b), LocationId(a)).unwrap());
                for c in 0..n {
                    let ac = shortest_path(&g, LocationId(a), LocationId(c)).unwrap();
                    let cb = shortest_path(&g, LocationId(c), LocationId(b)).unwrap();
                    proptest::prop_assert!(ab <= ac + cb);
                }
            }}
        }
    }
}
