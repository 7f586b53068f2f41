/* Subset of the OpenPLC runtime used to build the fixture binaries:
 * timespec helpers from the IEC standard library and two generated
 * program bodies. */

typedef struct {
    long tv_sec;
    long tv_nsec;
} IEC_TIMESPEC;

typedef struct {
    unsigned char EN;
    unsigned char ENO;
    unsigned char RUN;
    unsigned char R1;
    float XIN;
    float X0;
    float CYCLE;
    unsigned char Q;
    float XOUT;
} INTEGRAL;

typedef struct {
    unsigned char IN;
    unsigned char Q;
    long PT;
    long ET;
    long START;
} TON;

typedef struct {
    unsigned char BLINK_LED;
    unsigned char LAMP;
    TON TON0;
    TON TON1;
} PROG0;

extern long __current_time(void);

void __normalize_timespec(IEC_TIMESPEC *ts)
{
    if (ts->tv_nsec < -1000000000 || ((ts->tv_sec > 0) && (ts->tv_nsec < 0))) {
        ts->tv_sec--;
        ts->tv_nsec += 1000000000;
    }
    if (ts->tv_nsec > 1000000000 || ((ts->tv_sec < 0) && (ts->tv_nsec > 0))) {
        ts->tv_sec++;
        ts->tv_nsec -= 1000000000;
    }
}

IEC_TIMESPEC __time_add(IEC_TIMESPEC IN1, IEC_TIMESPEC IN2)
{
    IEC_TIMESPEC res = {IN1.tv_sec + IN2.tv_sec, IN1.tv_nsec + IN2.tv_nsec};
    __normalize_timespec(&res);
    return res;
}

IEC_TIMESPEC __time_sub(IEC_TIMESPEC IN1, IEC_TIMESPEC IN2)
{
    IEC_TIMESPEC res = {IN1.tv_sec - IN2.tv_sec, IN1.tv_nsec - IN2.tv_nsec};
    __normalize_timespec(&res);
    return res;
}

void INTEGRAL_body__(INTEGRAL *data__)
{
    if (!data__->EN) {
        data__->ENO = 0;
        return;
    }
    data__->ENO = 1;
    data__->Q = !data__->R1;
    if (data__->R1) {
        data__->XOUT = data__->X0;
    } else if (data__->RUN) {
        data__->XOUT = data__->XOUT + data__->XIN * data__->CYCLE;
    }
}

static void TON_body__(TON *t)
{
    long now = __current_time();
    if (!t->IN) {
        t->Q = 0;
        t->ET = 0;
        t->START = now;
        return;
    }
    t->ET = now - t->START;
    if (t->ET >= t->PT) {
        t->ET = t->PT;
        t->Q = 1;
    }
}

void PROG0_body__(PROG0 *data__)
{
    data__->TON0.IN = !data__->BLINK_LED;
    data__->TON0.PT = 500;
    TON_body__(&data__->TON0);
    data__->TON1.IN = data__->BLINK_LED;
    data__->TON1.PT = 500;
    TON_body__(&data__->TON1);
    if (data__->TON0.Q) {
        data__->BLINK_LED = 1;
    }
    if (data__->TON1.Q) {
        data__->BLINK_LED = 0;
    }
    data__->LAMP = data__->BLINK_LED;
}
