//! The plain-text tracking file format, one game per file:
//!
//! ```text
//! game <game-id> <home-team> <away-team>
//! player <agent-id> <home-team-name|away-team-name> <name?>
//! hoops <left|right>              # home team's first-half frontcourt
//! f <period> <clock> <ball-x> <ball-y> <ball-z> <id,x,y> x10
//! ```
//!
//! Fields are space-separated, player triples comma-separated, coordinates
//! in decimal feet. Unknown line types are parse errors. Frames that break
//! court bounds, reference unrostered players, carry fewer than 10 players,
//! or run backwards in time are dropped with a warning rather than failing
//! the whole file.

use std::path::Path;

use super::DataError;

pub const COURT_LENGTH: f64 = 94.0;
pub const COURT_WIDTH: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Team {
    Home,
    Away,
}

/// Which end of the court (x = 0 is `Left`, x = 94 is `Right`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoopSide {
    Left,
    Right,
}

impl HoopSide {
    pub fn opposite(self) -> Self {
        match self {
            HoopSide::Left => HoopSide::Right,
            HoopSide::Right => HoopSide::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub agent_id: u32,
    pub team: Team,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerPos {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub period: u8,
    /// Seconds remaining in the period; strictly decreasing within one.
    pub clock: f64,
    pub ball: [f64; 3],
    pub players: [PlayerPos; 10],
}

/// One ingested game at 25 Hz. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub game_id: String,
    pub home_team: String,
    pub away_team: String,
    pub roster: Vec<RosterEntry>,
    /// Home team's frontcourt in the first half; sides swap at halftime.
    pub home_hoop: HoopSide,
    pub frames: Vec<Frame>,
}

impl GameRecord {
    pub fn team_of(&self, agent_id: u32) -> Option<Team> {
        self.roster.iter().find(|r| r.agent_id == agent_id).map(|r| r.team)
    }

    /// Frontcourt side of `team` during `period` (sides swap after half).
    pub fn frontcourt_side(&self, team: Team, period: u8) -> HoopSide {
        let first_half = match team {
            Team::Home => self.home_hoop,
            Team::Away => self.home_hoop.opposite(),
        };
        if period >= 3 {
            first_half.opposite()
        } else {
            first_half
        }
    }
}

#[derive(Debug)]
pub struct IngestReport {
    pub record: GameRecord,
    pub warnings: Vec<String>,
}

pub fn ingest_game(path: &Path) -> Result<IngestReport, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_game(&text, &path.display().to_string())
}

pub fn parse_game(text: &str, path: &str) -> Result<IngestReport, DataError> {
    let err = |line: usize, message: String| DataError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 || head[0] != "game" {
        return Err(err(line_no, format!("expected `game <id> <home> <away>`, got `{header}`")));
    }
    let (game_id, home_team, away_team) =
        (head[1].to_string(), head[2].to_string(), head[3].to_string());

    let mut roster: Vec<RosterEntry> = Vec::new();
    let mut home_hoop: Option<HoopSide> = None;
    let mut frames: Vec<Frame> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "player" => {
                if fields.len() < 3 {
                    return Err(err(line_no, "expected `player <id> <team> <name?>`".into()));
                }
                let agent_id: u32 = fields[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad agent id `{}`", fields[1])))?;
                let team = if fields[2] == home_team {
                    Team::Home
                } else if fields[2] == away_team {
                    Team::Away
                } else {
                    return Err(err(line_no, format!("unknown team `{}`", fields[2])));
                };
                let name =
                    if fields.len() > 3 { Some(fields[3..].join(" ")) } else { None };
                roster.push(RosterEntry { agent_id, team, name });
            }
            "hoops" => {
                if fields.len() != 2 {
                    return Err(err(line_no, "expected `hoops <left|right>`".into()));
                }
                home_hoop = Some(match fields[1] {
                    "left" => HoopSide::Left,
                    "right" => HoopSide::Right,
                    other => return Err(err(line_no, format!("bad hoop side `{other}`"))),
                });
            }
            "f" => {
                let frame = parse_frame(&fields, line_no, path)?;
                match validate_frame(&frame, &roster, frames.last()) {
                    Ok(()) => frames.push(frame),
                    Err(reason) => {
                        warnings.push(format!("{path}:{line_no}: frame dropped: {reason}"))
                    }
                }
            }
            other => {
                return Err(err(line_no, format!("unknown line type `{other}`")));
            }
        }
    }

    let home_hoop =
        home_hoop.ok_or_else(|| err(1, "missing `hoops` line".into()))?;
    Ok(IngestReport {
        record: GameRecord { game_id, home_team, away_team, roster, home_hoop, frames },
        warnings,
    })
}

fn parse_frame(fields: &[&str], line_no: usize, path: &str) -> Result<Frame, DataError> {
    let err = |message: String| DataError::Parse { path: path.to_string(), line: line_no, message };
    if fields.len() != 16 {
        return Err(err(format!(
            "expected `f <period> <clock> <bx> <by> <bz>` plus 10 player triples, got {} fields",
            fields.len()
        )));
    }
    let num = |s: &str| -> Result<f64, DataError> {
        s.parse().map_err(|_| err(format!("bad number `{s}`")))
    };
    let period: u8 =
        fields[1].parse().map_err(|_| err(format!("bad period `{}`", fields[1])))?;
    let clock = num(fields[2])?;
    let ball = [num(fields[3])?, num(fields[4])?, num(fields[5])?];
    let mut players = [PlayerPos { id: 0, x: 0.0, y: 0.0 }; 10];
    for (i, triple) in fields[6..].iter().enumerate() {
        let parts: Vec<&str> = triple.split(',').collect();
        if parts.len() != 3 {
            return Err(err(format!("bad player triple `{triple}`")));
        }
        let id: u32 =
            parts[0].parse().map_err(|_| err(format!("bad agent id `{}`", parts[0])))?;
        players[i] = PlayerPos { id, x: num(parts[1])?, y: num(parts[2])? };
    }
    Ok(Frame { period, clock, ball, players })
}

fn validate_frame(
    frame: &Frame,
    roster: &[RosterEntry],
    previous: Option<&Frame>,
) -> Result<(), String> {
    let in_court = |x: f64, y: f64| (0.0..=COURT_LENGTH).contains(&x) && (0.0..=COURT_WIDTH).contains(&y);
    // NaN heights fail this check too and get dropped with the frame
    let height_ok = frame.ball[2] >= 0.0;
    if !in_court(frame.ball[0], frame.ball[1]) || !height_ok {
        return Err(format!("ball out of bounds at ({}, {}, {})", frame.ball[0], frame.ball[1], frame.ball[2]));
    }
    let mut ids = [0u32; 10];
    for (i, p) in frame.players.iter().enumerate() {
        if !in_court(p.x, p.y) {
            return Err(format!("player {} out of bounds at ({}, {})", p.id, p.x, p.y));
        }
        if !roster.iter().any(|r| r.agent_id == p.id) {
            return Err(format!("player {} not in roster", p.id));
        }
        ids[i] = p.id;
    }
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err("duplicate player id (fewer than 10 distinct players)".into());
    }
    if let Some(prev) = previous {
        let ordered = frame.period > prev.period
            || (frame.period == prev.period && frame.clock < prev.clock);
        if !ordered {
            return Err(format!(
                "out of order: period {} clock {} after period {} clock {}",
                frame.period, frame.clock, prev.period, prev.clock
            ));
        }
    }
    Ok(())
}

pub fn format_game(g: &GameRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!("game {} {} {}\n", g.game_id, g.home_team, g.away_team));
    for r in &g.roster {
        let team = match r.team {
            Team::Home => &g.home_team,
            Team::Away => &g.away_team,
        };
        match &r.name {
            Some(n) => out.push_str(&format!("player {} {} {}\n", r.agent_id, team, n)),
            None => out.push_str(&format!("player {} {}\n", r.agent_id, team)),
        }
    }
    out.push_str(&format!(
        "hoops {}\n",
        match g.home_hoop {
            HoopSide::Left => "left",
            HoopSide::Right => "right",
        }
    ));
    for f in &g.frames {
        out.push_str(&format!(
            "f {} {} {} {} {}",
            f.period, f.clock, f.ball[0], f.ball[1], f.ball[2]
        ));
        for p in &f.players {
            out.push_str(&format!(" {},{},{}", p.id, p.x, p.y));
        }
        out.push('\n');
    }
    out
}

pub fn write_game(g: &GameRecord, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, format_game(g))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_file() -> String {
        let mut s = String::from("game g1 HOME AWAY\n");
        for id in 0..5 {
            s.push_str(&format!("player {id} HOME P{id}\n"));
        }
        for id in 5..10 {
            s.push_str(&format!("player {id} AWAY\n"));
        }
        s.push_str("hoops left\n");
        s.push_str("f 1 720 47 25 4 ");
        s.push_str(
            &(0..10).map(|i| format!("{i},{}.5,25", 10 + i)).collect::<Vec<_>>().join(" "),
        );
        s.push('\n');
        s.push_str("f 1 719.96 47 25 4 ");
        s.push_str(
            &(0..10).map(|i| format!("{i},{}.6,25", 10 + i)).collect::<Vec<_>>().join(" "),
        );
        s.push('\n');
        s
    }

    #[test]
    fn minimal_two_frame_file_parses() {
        let report = parse_game(&minimal_file(), "mem").unwrap();
        assert!(report.warnings.is_empty());
        let g = report.record;
        assert_eq!(g.frames.len(), 2);
        assert_eq!(g.game_id, "g1");
        assert_eq!(g.roster.len(), 10);
        assert_eq!(g.frames[0].players[3].x, 13.5);
        assert_eq!(g.team_of(7), Some(Team::Away));
        assert_eq!(g.roster[0].name.as_deref(), Some("P0"));
        assert_eq!(g.roster[5].name, None);
    }

    #[test]
    fn out_of_bounds_frame_dropped_with_warning() {
        let mut text = minimal_file();
        text.push_str("f 1 719.92 47 25 4 ");
        text.push_str(
            &(0..10).map(|i| format!("{i},95.0,25", )).collect::<Vec<_>>().join(" "),
        );
        text.push('\n');
        let report = parse_game(&text, "mem").unwrap();
        assert_eq!(report.record.frames.len(), 2);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("out of bounds"), "{}", report.warnings[0]);
    }

    #[test]
    fn unknown_line_type_is_parse_error_with_line_number() {
        let mut text = minimal_file();
        text.push_str("event rebound\n");
        let err = parse_game(&text, "mem").unwrap_err();
        match err {
            DataError::Parse { line, message, .. } => {
                assert_eq!(line, 15);
                assert!(message.contains("unknown line type"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_rows_are_errors() {
        let err = parse_game("nonsense\n", "mem").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));

        let mut text = minimal_file();
        text.push_str("f 1 719.9 47 25\n"); // too few fields
        assert!(matches!(parse_game(&text, "mem").unwrap_err(), DataError::Parse { line: 15, .. }));

        let mut text = minimal_file();
        text.push_str("f 1 719.9 4x 25 4 ");
        text.push_str(&(0..10).map(|i| format!("{i},20,25")).collect::<Vec<_>>().join(" "));
        text.push('\n');
        assert!(matches!(parse_game(&text, "mem").unwrap_err(), DataError::Parse { .. }));
    }

    #[test]
    fn duplicate_player_frame_dropped() {
        let mut text = minimal_file();
        // ten triples but player 0 appears twice
        text.push_str("f 1 719.9 47 25 4 ");
        let mut triples: Vec<String> = (0..9).map(|i| format!("{i},20,25")).collect();
        triples.push("0,21,25".into());
        text.push_str(&triples.join(" "));
        text.push('\n');
        let report = parse_game(&text, "mem").unwrap();
        assert_eq!(report.record.frames.len(), 2);
        assert!(report.warnings[0].contains("fewer than 10 distinct"));
    }

    #[test]
    fn nonfinite_coordinates_are_dropped_as_bound_violations() {
        let mut text = minimal_file();
        text.push_str("f 1 719.9 NaN 25 4 ");
        text.push_str(&(0..10).map(|i| format!("{i},20,25")).collect::<Vec<_>>().join(" "));
        text.push('\n');
        let report = parse_game(&text, "mem").unwrap();
        assert_eq!(report.record.frames.len(), 2);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn format_parse_round_trip_is_lossless() {
        let report = parse_game(&minimal_file(), "mem").unwrap();
        let text = format_game(&report.record);
        let again = parse_game(&text, "mem").unwrap();
        assert_eq!(report.record, again.record);
        // and formatting is a fixed point
        assert_eq!(text, format_game(&again.record));
    }
}
