//! The three `summary` renderings of one model agree with each other.

mod common;

use common::{code, fnnstat, s, stderr, stdout, write_design};
use serde_json::Value;

fn code_for(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

#[test]
fn text_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = write_design(d, 120, 21);
    let model = d.join("m.json");
    let out = fnnstat(&["fit", "--data", s(&data), "--response", "y", "--q", "2", "--restarts", "3", "--out", s(&model)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = |format: &str| {
        let out = fnnstat(&["summary", "--model", s(&model), "--data", s(&data), "--format", format]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    };
    let json: Value = serde_json::from_str(&run("json")).unwrap();
    let text = run("text");
    let csv_text = run("csv");

    assert_eq!(json["format_version"], 1);
    assert_eq!(json["q"], 2);
    assert_eq!(json["positive_definite"], true);
    let covs = json["covariates"].as_array().unwrap();

    // text: one row per covariate with q estimate cells and the MP p-value
    for c in covs {
        let name = c["name"].as_str().unwrap();
        let line = text
            .lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .unwrap_or_else(|| panic!("no row for {name}"));
        let cells: Vec<&str> = line.split_whitespace().skip(1).collect();
        assert_eq!(cells.len(), 3, "{line}");
        for (cell, w) in cells.iter().zip(c["weights"].as_array().unwrap()) {
            let est = w["estimate"].as_f64().unwrap();
            let p = w["p_value"].as_f64().unwrap();
            assert_eq!(*cell, format!("{est:.2}{}", code_for(p)), "{name}");
            assert_eq!(w["code"], code_for(p));
        }
        let mp = c["p_value"].as_f64().unwrap();
        assert_eq!(cells[2], p_text(mp), "{name}");
        assert!(c["df"].as_f64().unwrap() > 0.0);
    }
    assert!(text.trim_end().ends_with("Significance codes: 0 *** 0.001 ** 0.01 * 0.05"));

    // csv: exact values
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        ["covariate", "label", "node", "estimate", "std_error", "statistic", "p_value", "code", "mp_statistic", "mp_df", "mp_p_value"]
    );
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let r = 2 * (covs.len() + 2) + 1;
    assert_eq!(records.len(), r);
    let mut by_label = std::collections::BTreeMap::new();
    for c in covs {
        for w in c["weights"].as_array().unwrap() {
            by_label.insert(w["label"].as_str().unwrap().to_string(), (w.clone(), Some(c.clone())));
        }
    }
    for t in json["other_parameters"].as_array().unwrap() {
        by_label.insert(t["label"].as_str().unwrap().to_string(), (t.clone(), None));
    }
    assert_eq!(by_label.len(), r);
    for rec in &records {
        let (t, cov) = &by_label[&rec[1]];
        let num = |i: usize| rec[i].parse::<f64>().unwrap();
        assert_eq!(num(3), t["estimate"].as_f64().unwrap());
        assert_eq!(num(4), t["std_error"].as_f64().unwrap());
        assert_eq!(num(6), t["p_value"].as_f64().unwrap());
        assert_eq!(&rec[7], t["code"].as_str().unwrap());
        match cov {
            Some(c) => {
                assert_eq!(&rec[0], c["name"].as_str().unwrap());
                assert_eq!(num(10), c["p_value"].as_f64().unwrap());
                assert_eq!(num(9), c["df"].as_f64().unwrap());
            }
            None => assert!(rec[0].is_empty() && rec[10].is_empty()),
        }
    }
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = write_design(d, 60, 22);
    let model = d.join("m.json");
    assert_eq!(code(&fnnstat(&["fit", "--data", s(&data), "--response", "y", "--q", "1", "--out", s(&model)])), 0);
    let file = d.join("r.json");
    let a = fnnstat(&["summary", "--model", s(&model), "--data", s(&data), "--format", "json", "--out", s(&file)]);
    assert_eq!(code(&a), 0);
    assert!(stdout(&a).is_empty());
    let b = fnnstat(&["summary", "--model", s(&model), "--data", s(&data), "--format", "json"]);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), stdout(&b));
}
