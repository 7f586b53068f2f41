//
// This file was generated by the Retargetable Decompiler
// Website: https://retdec.com
//

#include <stdbool.h>
#include <stdint.h>

// ------------------- Function Prototypes --------------------

int64_t __current_time(void);
void __normalize_timespec(int64_t * a1);
int64_t __time_add(int64_t a1, int64_t a2, int64_t a3, int64_t a4);
int64_t __time_sub(int64_t a1, int64_t a2, int64_t a3, int64_t a4);
void INTEGRAL_body__(int64_t * a1);
void TON_body__(int64_t * a1);
void PROG0_body__(int64_t * a1);

// ------------------------ Functions -------------------------

// Address range: 0x0 - 0x8f
void __normalize_timespec(int64_t * a1) {
    int64_t * v1 = (int64_t *)((int64_t)a1 + 8); // 0x8
    int64_t v2 = *v1; // 0x8
    int64_t v3 = *a1; // 0xc
    if (v2 < -0x3b9aca00 || v3 > 0 && v2 < 0) {
        // 0x2a
        *a1 = v3 - 1;
        v2 += 0x3b9aca00;
        *v1 = v2;
        v3--;
    }
    if (v2 > 0x3b9aca00 || v3 < 0 && v2 > 0) {
        // 0x5e
        *a1 = v3 + 1;
        *v1 = v2 - 0x3b9aca00;
    }
}

// Address range: 0x90 - 0xf3
int64_t __time_add(int64_t a1, int64_t a2, int64_t a3, int64_t a4) {
    int64_t v1 = a1 + a3; // 0xb0
    int64_t v2 = a2 + a4; // 0xbc
    __normalize_timespec(&v1);
    return v1;
}

// Address range: 0x100 - 0x163
int64_t __time_sub(int64_t a1, int64_t a2, int64_t a3, int64_t a4) {
    int64_t v1 = a1 - a3; // 0x120
    int64_t v2 = a2 - a4; // 0x12c
    __normalize_timespec(&v1);
    return v1;
}

// Address range: 0x170 - 0x20a
void INTEGRAL_body__(int64_t * a1) {
    char * v1 = (char *)((int64_t)a1 + 1); // 0x178
    if (*(char *)a1 == 0) {
        // 0x185
        *v1 = 0;
        return;
    }
    // 0x18e
    *v1 = 1;
    char v2 = *(char *)((int64_t)a1 + 3); // 0x196
    *(char *)((int64_t)a1 + 16) = (char)(v2 == 0);
    float * v3 = (float *)((int64_t)a1 + 20); // 0x1a8
    if (v2 != 0) {
        // 0x1b3
        *v3 = *(float *)((int64_t)a1 + 8);
        return;
    }
    // 0x1c2
    if (*(char *)((int64_t)a1 + 2) != 0) {
        // 0x1cd
        *v3 = *v3 + *(float *)((int64_t)a1 + 4) * *(float *)((int64_t)a1 + 12);
    }
}

// Address range: 0x210 - 0x2a9
void TON_body__(int64_t * a1) {
    int64_t v1 = __current_time(); // 0x21c
    if (*(char *)a1 == 0) {
        // 0x22b
        *(char *)((int64_t)a1 + 1) = 0;
        *(int64_t *)((int64_t)a1 + 16) = 0;
        *(int64_t *)((int64_t)a1 + 24) = v1;
        return;
    }
    int64_t v2 = v1 - *(int64_t *)((int64_t)a1 + 24); // 0x251
    int64_t * v3 = (int64_t *)((int64_t)a1 + 16); // 0x255
    *v3 = v2;
    int64_t v4 = *(int64_t *)((int64_t)a1 + 8); // 0x25d
    if (v2 >= v4) {
        // 0x268
        *v3 = v4;
        *(char *)((int64_t)a1 + 1) = 1;
    }
}

// Address range: 0x2b0 - 0x378
void PROG0_body__(int64_t * a1) {
    char v1 = *(char *)a1; // 0x2b8
    int64_t * v2 = (int64_t *)((int64_t)a1 + 8); // 0x2bc
    *(char *)v2 = (char)(v1 == 0);
    *(int64_t *)((int64_t)a1 + 16) = 500;
    TON_body__(v2);
    int64_t * v3 = (int64_t *)((int64_t)a1 + 40); // 0x2e0
    *(char *)v3 = *(char *)a1;
    *(int64_t *)((int64_t)a1 + 48) = 500;
    TON_body__(v3);
    if (*(char *)((int64_t)a1 + 9) != 0) {
        // 0x31a
        *(char *)a1 = 1;
    }
    if (*(char *)((int64_t)a1 + 41) != 0) {
        // 0x33c
        *(char *)a1 = 0;
    }
    // 0x34f
    *(char *)((int64_t)a1 + 1) = *(char *)a1;
}

// --------------- Dynamically Linked Functions ---------------

// int64_t __current_time(void);

// --------------------- Meta-Information ---------------------

// Detected compiler/packer: clang (14.0.0)
// Detected functions: 7
