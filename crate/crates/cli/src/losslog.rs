//! CSV loss log and checkpoint-writing hooks for the training loop.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use stvu_core::train::{LossReport, TrainError, TrainHooks, Trainer};

use crate::checkpoint;
use crate::error::CliError;

/// Writes `iteration,l_m,l_s,l_f,total,lr` rows as training progresses
/// and drops periodic + final checkpoints into the output directory.
pub struct FileHooks {
    out_dir: PathBuf,
    phase_tag: &'static str,
    writer: BufWriter<File>,
    echo_every: u64,
}

impl FileHooks {
    pub fn new(out_dir: &Path, phase_tag: &'static str, echo_every: u64) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(e, out_dir))?;
        let path = out_dir.join(format!("{phase_tag}_loss.csv"));
        let mut writer = BufWriter::new(File::create(&path).map_err(|e| CliError::io(e, &path))?);
        writeln!(writer, "{}", LossReport::csv_header()).map_err(CliError::from)?;
        Ok(FileHooks {
            out_dir: out_dir.to_path_buf(),
            phase_tag,
            writer,
            echo_every,
        })
    }

    pub fn checkpoint_path(&self, iteration: u64) -> PathBuf {
        self.out_dir
            .join(format!("ckpt_{}_{:07}.bin", self.phase_tag, iteration))
    }

    pub fn final_path(&self) -> PathBuf {
        self.out_dir.join(format!("ckpt_{}_final.bin", self.phase_tag))
    }
}

impl TrainHooks<f32> for FileHooks {
    fn on_report(&mut self, report: &LossReport) {
        let _ = writeln!(self.writer, "{}", report.csv_row());
        if self.echo_every > 0 && report.iteration % self.echo_every == 0 {
            let _ = self.writer.flush();
            println!(
                "[{}] iter {:>7}  l_m {:.6}  l_s {:.6}  l_f {:.6}  total {:.6}  lr {:.2e}",
                self.phase_tag, report.iteration, report.l_m, report.l_s, report.l_f, report.total, report.lr
            );
        }
    }

    fn on_checkpoint(&mut self, trainer: &Trainer<f32>) -> Result<(), TrainError> {
        let _ = self.writer.flush();
        let ckpt = checkpoint::from_trainer(trainer);
        let path = if trainer.iteration == trainer.schedule.total_iters {
            self.final_path()
        } else {
            self.checkpoint_path(trainer.iteration)
        };
        checkpoint::save(&ckpt, &path).map_err(|e| TrainError::Data(e.to_string()))
    }
}
