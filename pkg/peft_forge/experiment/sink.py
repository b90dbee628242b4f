"""Optional InfluxDB sink for ResultRecords."""
import logging

from influxdb_client import InfluxDBClient, Point, WritePrecision
from influxdb_client.client.write_api import SYNCHRONOUS

from peft_forge import settings

logger = logging.getLogger(__name__)


def build_point(record, study):
    return (
        Point(f"peft_forge_{study}")
        .tag("study", study)
        .tag("label", record.label)
        .tag("position", record.position)
        .tag("init", record.init)
        .tag("scaling", record.scaling)
        .tag("data_norm", record.data_norm)
        .tag("seed", str(record.seed))
        .field("val_acc", float(record.val_acc))
        .field("test_acc", float(record.test_acc))
        .field("params", int(record.params))
        .field("seconds", float(record.seconds))
        .field("cpu_percent", float(record.cpu_percent))
        .field("mem_percent", float(record.mem_percent))
        .field("final_loss", float(record.final_loss))
    )


def sink_enabled():
    return bool(settings.INFLUX_URL)


def write_records(records, study):
    """Send one point per record when INFLUX_URL is configured; returns the number written."""
    if not sink_enabled() or not records:
        return 0
    points = [build_point(r, study) for r in records]
    try:
        with InfluxDBClient(url=settings.INFLUX_URL, token=settings.INFLUX_TOKEN, org=settings.INFLUX_ORG) as client:
            client.write_api(write_options=SYNCHRONOUS).write(
                bucket=settings.INFLUX_BUCKET, record=points, write_precision=WritePrecision.S
            )
    except Exception as exc:
        logger.warning("influx write of %d points failed: %s", len(points), exc)
        print(f"     ❌ InfluxDB: {exc}")
        return 0
    print(f"     📊 {len(points)} points sent to InfluxDB ({settings.INFLUX_BUCKET})")
    return len(points)
