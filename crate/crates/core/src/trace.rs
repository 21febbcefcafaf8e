//! Per-period agent traces for conformance debugging.
//!
//! One CSV line per agent per period:
//!
//! ```text
//! kind,period,id,resource,is_oneshot,cs,co,hold_counter,target_set_size
//! vehicle,12,3,41,false,7,2,,
//! attacker,12,0,41,,,,5,4
//! ```
//!
//! Counter values are those in force when the transmission was decided.

use std::io::{self, Write};

use crate::channel::{Observer, PeriodView};

pub const HEADER: &str = "kind,period,id,resource,is_oneshot,cs,co,hold_counter,target_set_size";

pub struct TraceWriter<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> Self {
        let error = writeln!(out, "{HEADER}").err();
        TraceWriter { out, error }
    }

    fn write_period(&mut self, view: &PeriodView<'_>) -> io::Result<()> {
        for (v, d) in view.vehicles.iter().zip(view.decisions) {
            writeln!(
                self.out,
                "vehicle,{},{},{},{},{},{},,",
                view.period, v.vehicle_id, d.resource, d.is_oneshot, v.cs, v.co
            )?;
        }
        for a in view.attackers {
            writeln!(
                self.out,
                "attacker,{},{},{},,,,{},{}",
                view.period, a.attacker_id, a.attack_resource, a.hold_counter, view.target_set_size
            )?;
        }
        Ok(())
    }

    /// Flushes and returns the sink, or the first write error.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for TraceWriter<W> {
    fn on_period(&mut self, view: &PeriodView<'_>) {
        if self.error.is_none() {
            self.error = self.write_period(view).err();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Simulation;
    use crate::config::ScenarioConfig;

    #[test]
    fn one_line_per_agent_per_period() {
        let cfg = ScenarioConfig {
            num_targets: 3,
            num_attackers: 2,
            oneshot_enabled: true,
            sim_periods: 20,
            ..Default::default()
        };
        let mut trace = TraceWriter::new(Vec::new());
        Simulation::new(&cfg, 0).unwrap().run_with(&mut trace);
        let text = String::from_utf8(trace.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines.len(), 1 + 20 * 5);
        assert!(lines[1].starts_with("vehicle,0,0,"));
        assert!(lines[4].starts_with("attacker,0,0,"));
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 9, "{l}");
        }
    }
}
