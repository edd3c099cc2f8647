//! Reference implementations used as test oracles. They are written
//! from the definitions, favouring obviousness over speed, and share no
//! code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use qrelkit_core::measures::Measure;
use qrelkit_core::model::{Grade, Provenance, Qrels, Run, Scale};
use qrelkit_core::reliability::{SweepConfig, SweepReport};
use scraper::{Html, Node};

/// Binary relevance: doc -> relevant?
pub type Judged = BTreeMap<String, bool>;

fn rel(j: &Judged, d: &str) -> bool {
    j.get(d).copied().unwrap_or(false)
}

pub fn p_at(ranking: &[String], j: &Judged, k: usize) -> f64 {
    let mut hits = 0.0;
    for i in 0..k {
        if i < ranking.len() && rel(j, &ranking[i]) {
            hits += 1.0;
        }
    }
    hits / k as f64
}

/// Document-centric AP: for each relevant document, its precision at the
/// rank where it was retrieved (or 0), averaged over all relevant ones.
pub fn ap_at(ranking: &[String], j: &Judged, k: usize) -> f64 {
    let relevant: Vec<&String> = j.iter().filter(|(_, r)| **r).map(|(d, _)| d).collect();
    if relevant.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for d in &relevant {
        if let Some(pos) = ranking.iter().take(k).position(|x| x == *d) {
            let above = ranking[..=pos].iter().filter(|x| rel(j, x)).count();
            total += above as f64 / (pos + 1) as f64;
        }
    }
    total / relevant.len() as f64
}

pub fn ndcg_at(ranking: &[String], j: &Judged, k: usize) -> f64 {
    let gain = |d: &str| if rel(j, d) { 1.0 } else { 0.0 };
    let mut dcg = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if i >= k {
            break;
        }
        dcg += gain(d) / ((i + 2) as f64).log2();
    }
    let r = j.values().filter(|x| **x).count();
    let mut idcg = 0.0;
    for i in 0..r.min(k) {
        idcg += 1.0 / ((i + 2) as f64).log2();
    }
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn rr(ranking: &[String], j: &Judged) -> f64 {
    for (i, d) in ranking.iter().enumerate() {
        if rel(j, d) {
            return 1.0 / (i as f64 + 1.0);
        }
    }
    0.0
}

pub fn recall_at(ranking: &[String], j: &Judged, k: usize) -> f64 {
    let r = j.values().filter(|x| **x).count();
    if r == 0 {
        return 0.0;
    }
    ranking.iter().take(k).filter(|d| rel(j, d)).count() as f64 / r as f64
}

/// Share of the top `k` crawled for the topic; `crawled` holds those docs.
pub fn crawl_ratio(ranking: &[String], crawled: &BTreeSet<String>, k: usize) -> f64 {
    let mut n = 0;
    for d in ranking.iter().take(k) {
        if crawled.contains(d) {
            n += 1;
        }
    }
    n as f64 / k as f64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Union of the top `d` of every list.
pub fn union_top(lists: &[Vec<String>], d: usize) -> BTreeSet<String> {
    let mut u = BTreeSet::new();
    for l in lists {
        for x in l.iter().take(d) {
            u.insert(x.clone());
        }
    }
    u
}

/// Smallest depth whose union (plus `forced`) reaches `k`, found by
/// recomputing the union from scratch at every depth.
pub fn size_k(lists: &[Vec<String>], forced: &BTreeSet<String>, k: usize) -> (usize, BTreeSet<String>, bool) {
    let longest = lists.iter().map(Vec::len).max().unwrap_or(0);
    for d in 0..=longest {
        let u = union_top(lists, d);
        let total: BTreeSet<&String> = u.iter().chain(forced.iter()).collect();
        if total.len() >= k {
            return (d, u, true);
        }
    }
    (longest, union_top(lists, longest), false)
}

/// Kendall tau by enumerating every pair.
pub fn tau(a: &[String], b: &[String]) -> f64 {
    let pos: HashMap<&String, usize> = b.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let n = a.len();
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            if pos[&a[i]] < pos[&a[j]] {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c - d) as f64 / (n * (n - 1) / 2) as f64
}

/// Cohen's kappa from paired labels.
pub fn kappa(pairs: &[(i8, i8)]) -> f64 {
    let n = pairs.len() as f64;
    let agree = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let mut ca: HashMap<i8, f64> = HashMap::new();
    let mut cb: HashMap<i8, f64> = HashMap::new();
    for (a, b) in pairs {
        *ca.entry(*a).or_default() += 1.0;
        *cb.entry(*b).or_default() += 1.0;
    }
    let chance: f64 = ca.iter().map(|(k, v)| v * cb.get(k).copied().unwrap_or(0.0)).sum::<f64>() / (n * n);
    (agree - chance) / (1.0 - chance)
}

/// Elements whose content a reader never sees on the cleaned page.
const INVISIBLE: &[&str] = &[
    "script", "style", "link", "meta", "base", "object", "embed", "applet", "iframe", "frame",
    "frameset", "noscript", "noembed", "noframes", "template", "button", "input", "title", "svg",
    "math", "head",
];

/// Text stream of an HTML fragment, whitespace-collapsed, skipping
/// invisible subtrees. Walks top-down through child links only.
pub fn visible_text(html: &str) -> String {
    fn walk(node: ego_tree::NodeRef<'_, Node>, out: &mut String) {
        for child in node.children() {
            match child.value() {
                Node::Text(t) => out.push_str(t),
                Node::Element(e) if INVISIBLE.contains(&e.name()) => {}
                _ => walk(child, out),
            }
        }
    }
    let doc = Html::parse_fragment(html);
    let mut text = String::new();
    walk(doc.tree.root(), &mut text);
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Every element name and attribute name in a fragment.
pub fn markup_names(html: &str) -> (Vec<String>, Vec<String>) {
    fn walk(node: ego_tree::NodeRef<'_, Node>, els: &mut Vec<String>, attrs: &mut Vec<String>) {
        for child in node.children() {
            if let Node::Element(e) = child.value() {
                els.push(e.name().to_string());
                attrs.extend(e.attrs().map(|(k, v)| format!("{k}={v}")));
            }
            walk(child, els, attrs);
        }
    }
    let doc = Html::parse_fragment(html);
    let (mut els, mut attrs) = (Vec::new(), Vec::new());
    walk(doc.tree.root(), &mut els, &mut attrs);
    (els, attrs)
}

/// Pieces of tag soup used to build malformed documents.
pub const SOUP: &[&str] = &[
    "<p>", "</p>", "<b>", "</b>", "<i>", "</i>", "<div>", "</div>", "<table>", "<tr>", "<td>",
    "</td>", "</table>", "<caption>", "<li>", "<ul>", "</ul>", "<a href=\"x.html\">", "</a>",
    "<a href=\"javascript:x()\">", "<script>var a = '<p>';</script>", "<style>p{color:red}</style>",
    "<form action=\"/go\">", "</form>", "<input value=\"v\">", "<button>press</button>",
    "<iframe src=\"x\">frame</iframe>", "<object data=\"o\">obj</object>", "<embed src=\"e\">",
    "<noscript>ns</noscript>", "<pre>", "</pre>", "\n", "  ", "hello", "world", "Social", "media",
    "&amp;", "&lt;", "&nbsp;", "<", ">", "&", "\"", "<!-- note -->", "<textarea>", "</textarea>",
    "<select>", "<option>", "<xmp>", "<plaintext>", "<h1>", "</h1>", "<nobr>", "<font color=red>",
    "</font>", "<img src=\"i.png\" onerror=\"x()\">", "<br>", "</br>", "<hr>", "<span style=\"x\">",
    "</span>", "<svg><circle/></svg>", "<math><mi>x</mi></math>", "<template>t</template>",
    "<title>T</title>", "<head>", "<body>", "<html>", "<dl><dt>", "<dd>", "<ruby>", "<rt>", "<em>",
    "<frameset>", "<marquee>", "<listing>", "<center>", "<blink>", "<tbody>", "<th>", "<colgroup>",
    "<col>", "<isindex>", "<image>", "<wbr>", "<keygen>", "<applet>ap</applet>", "<meta x=y>",
    "<p onclick=\"x\" class=\"c\" id=\"k\">", "<a name=n>", "é", "日本", "<![CDATA[x]]>", "<?pi?>",
    "<!DOCTYPE html>", "</html>", "</body>", "<base href=\"h\">",
];

/// Deterministic malformed document number `i` built from [`SOUP`].
pub fn soup_doc(i: u64, pieces: usize) -> String {
    // xorshift keeps this independent of any RNG crate
    let mut x = i.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut s = String::new();
    for _ in 0..pieces {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        s.push_str(SOUP[(x % SOUP.len() as u64) as usize]);
    }
    s
}

pub struct Fixture {
    pub students: Vec<Run>,
    pub pooling: Vec<Run>,
    pub noise: Vec<String>,
    pub qrels: Qrels,
    pub topics: Vec<String>,
}

pub fn fixture(systems: usize, topics: usize, depth: usize) -> Fixture {
    let mut students = Vec::new();
    let topic_ids: Vec<String> = (0..topics).map(|t| format!("t{t}")).collect();
    for s in 0..systems {
        let mut run = Run::new(format!("s{s}"));
        for (ti, t) in topic_ids.iter().enumerate() {
            let docs: Vec<String> = (0..depth).map(|i| format!("d{:03}", (i * (2 * s + 1) + 3 * ti + s) % 120)).collect();
            let mut seen = BTreeSet::new();
            let docs: Vec<String> = docs.into_iter().filter(|d| seen.insert(d.clone())).collect();
            run = run.with_ranking(t.clone(), &docs);
        }
        students.push(run);
    }
    let mut google = Run::new("google");
    for (ti, t) in topic_ids.iter().enumerate() {
        let docs: Vec<String> = (0..30).map(|i| format!("d{:03}", (119 - i - ti) % 120)).collect();
        google = google.with_ranking(t.clone(), &docs);
    }
    let mut pooling = students.clone();
    pooling.push(google);
    let noise: Vec<String> = (0..40).map(|i| format!("noise{i:02}")).collect();
    let mut qrels = Qrels::new(Scale::Graded3);
    for (ti, t) in topic_ids.iter().enumerate() {
        for d in 0..120 {
            let g = ((d * 7 + ti * 3) % 5) as i8 - 1;
            qrels.insert(t, &format!("d{d:03}"), Grade::new(g.min(2)).unwrap()).unwrap();
        }
        for n in &noise {
            qrels.insert(t, n, Grade::NONRELEVANT).unwrap();
        }
    }
    Fixture { students, pooling, noise, qrels, topics: topic_ids }
}

/// Sweep rows recomputed from scratch; noise picks come from the library
/// pools so the oracle does not need the sampler.
/// Expected mean increment, max increment and tau of one sweep cell.
pub type CellOracle = (Option<f64>, Option<f64>, f64);

pub fn sweep_oracle(f: &Fixture, config: &SweepConfig, report: &SweepReport) -> Vec<Vec<CellOracle>> {
    let mut means: Vec<BTreeMap<Measure, BTreeMap<String, f64>>> = Vec::new();
    for eval in &report.evaluations {
        let mut per_measure: BTreeMap<Measure, BTreeMap<String, f64>> = BTreeMap::new();
        let mut judged_by_topic = BTreeMap::new();
        for t in &f.topics {
            let lists: Vec<Vec<String>> = f.pooling.iter().map(|r| r.ranking(t).into_iter().map(str::to_string).collect()).collect();
            let google: Vec<String> = lists.last().unwrap().iter().take(config.k_google).cloned().collect();
            let lib_pool = eval.pools.iter().find(|p| &p.topic_id == t).unwrap();
            let noise: BTreeSet<String> = lib_pool.members.iter().filter(|(_, p)| **p == Provenance::Noise).map(|(d, _)| d.clone()).collect();
            let forced: BTreeSet<String> = google.iter().cloned().chain(noise.iter().cloned()).collect();
            let (_, union, _) = size_k(&lists, &forced, eval.size);
            let members: BTreeSet<String> = union.union(&forced).cloned().collect();
            let judged: Judged = f.qrels.topic(t).unwrap().iter().filter(|(d, _)| members.contains(*d)).map(|(d, g)| (d.clone(), g.is_relevant())).collect();
            judged_by_topic.insert(t.clone(), judged);
        }
        for m in &config.measures {
            let mut sys = BTreeMap::new();
            for run in &f.students {
                let vals: Vec<f64> = f.topics.iter().map(|t| {
                    let ranking: Vec<String> = run.ranking(t).into_iter().map(str::to_string).collect();
                    let j = &judged_by_topic[t];
                    match m {
                        Measure::Ndcg(k) => ndcg_at(&ranking, j, *k),
                        Measure::Ap(k) => ap_at(&ranking, j, *k),
                        Measure::P(k) => p_at(&ranking, j, *k),
                        Measure::Rr => rr(&ranking, j),
                        _ => unreachable!(),
                    }
                }).collect();
                sys.insert(run.system_id.clone(), mean(&vals));
            }
            per_measure.insert(*m, sys);
        }
        means.push(per_measure);
    }
    let order = |scores: &BTreeMap<String, f64>| {
        let mut v: Vec<(&String, f64)> = scores.iter().map(|(s, x)| (s, *x)).collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        v.into_iter().map(|(s, _)| s.clone()).collect::<Vec<_>>()
    };
    means
        .windows(2)
        .map(|w| {
            config.measures.iter().map(|m| {
                let (a, b) = (&w[0][m], &w[1][m]);
                let incs: Vec<f64> = a.iter().filter(|(_, x)| **x != 0.0).map(|(s, x)| 100.0 * (b[s] - x) / x).collect();
                let (mean, max) = if incs.is_empty() { (None, None) } else { (Some(mean(&incs)), Some(incs.iter().cloned().fold(f64::MIN, f64::max))) };
                (mean, max, tau(&order(a), &order(b)))
            }).collect()
        })
        .collect()
}

pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    }
}


/// A topic in the canonical layout, with a multi-line level description.
pub const SAMPLE_TOPIC: &str = r#"<topic id="2012-014">
  <title>Social media in the Arab uprisings</title>
  <relevance>
    <level value="2">The document must discuss the role of social media sites such as Facebook, Twitter or Youtube
      in the uprisings in Arab countries such as Egypt or Tunisia.</level>
    <level value="1">The document discusses the topic, but focuses on just one site or one country in
      particular.</level>
    <level value="0">The document may discuss one particular case where social media was used, but there is no global
      information.</level>
  </relevance>
</topic>
"#;
